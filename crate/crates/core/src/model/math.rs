//! Small numerically careful helpers shared by the forward and loss code.

use ndarray::{Array1, ArrayView1};

/// Sums values in sorted order so the result does not depend on input order.
pub fn ordered_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().collect();
    v.sort_by(f64::total_cmp);
    v.into_iter().sum()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(x)) without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn log_sum_exp(x: ArrayView1<f64>) -> f64 {
    let max = x.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    if !max.is_finite() {
        return max;
    }
    max + x.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

/// Softmax with max subtraction.
pub fn softmax(x: ArrayView1<f64>) -> Array1<f64> {
    let max = x.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut out = x.mapv(|v| (v - max).exp());
    let z = out.sum();
    out /= z;
    out
}

pub fn log_softmax(x: ArrayView1<f64>) -> Array1<f64> {
    let lse = log_sum_exp(x);
    x.mapv(|v| v - lse)
}
