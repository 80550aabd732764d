use ndarray::{Array1, ArrayView1, Axis};

use super::math::{sigmoid, softmax};
use super::{DiscriminatorParams, PredictorParams};
use crate::error::{Error, Result};

fn check_dim(what: &str, v: ArrayView1<f64>, d: usize) -> Result<()> {
    if v.len() != d {
        return Err(Error::Shape(format!("{what} has {} dims, expected {d}", v.len())));
    }
    Ok(())
}

/// Item logits W_I e.
pub fn item_logits(p: &PredictorParams, e: ArrayView1<f64>) -> Result<Array1<f64>> {
    check_dim("embedding", e, p.weight.ncols())?;
    Ok(p.weight.dot(&e))
}

/// π(e) = softmax(W_I e).
pub fn predict_items(p: &PredictorParams, e: ArrayView1<f64>) -> Result<Array1<f64>> {
    Ok(softmax(item_logits(p, e)?.view()))
}

/// Accumulates dW_I and returns dL/de given dL/dlogits.
pub fn predictor_backward(
    p: &PredictorParams,
    e: ArrayView1<f64>,
    d_logits: ArrayView1<f64>,
    grads: &mut PredictorParams,
) -> Array1<f64> {
    grads.weight += &d_logits.insert_axis(Axis(1)).dot(&e.insert_axis(Axis(0)));
    p.weight.t().dot(&d_logits)
}

/// Raw bilinear score e_uᵀ W e_g.
pub fn bilinear_score(p: &DiscriminatorParams, e_u: ArrayView1<f64>, e_g: ArrayView1<f64>) -> Result<f64> {
    let d = p.weight.nrows();
    check_dim("user embedding", e_u, d)?;
    check_dim("group embedding", e_g, d)?;
    Ok(e_u.dot(&p.weight.dot(&e_g)))
}

/// D(e_u, e_g) = σ(e_uᵀ W e_g).
pub fn discriminate(p: &DiscriminatorParams, e_u: ArrayView1<f64>, e_g: ArrayView1<f64>) -> Result<f64> {
    bilinear_score(p, e_u, e_g).map(sigmoid)
}

/// Accumulates dW and returns (dL/de_u, dL/de_g) given dL/dscore.
pub fn discriminator_backward(
    p: &DiscriminatorParams,
    e_u: ArrayView1<f64>,
    e_g: ArrayView1<f64>,
    d_score: f64,
    grads: &mut DiscriminatorParams,
) -> (Array1<f64>, Array1<f64>) {
    grads
        .weight
        .scaled_add(d_score, &e_u.insert_axis(Axis(1)).dot(&e_g.insert_axis(Axis(0))));
    (p.weight.dot(&e_g) * d_score, p.weight.t().dot(&e_u) * d_score)
}
