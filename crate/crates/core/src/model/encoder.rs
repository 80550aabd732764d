use ndarray::{Array1, ArrayView1, Axis};

use super::EncoderParams;
use crate::error::{Error, Result};

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct EncoderTrace {
    pub hidden: Array1<f64>,
    pub output: Array1<f64>,
}

fn second_layer(p: &EncoderParams, pre1: Array1<f64>) -> EncoderTrace {
    let hidden = pre1.mapv(f64::tanh);
    let output = (p.w2.t().dot(&hidden) + &p.b2).mapv(f64::tanh);
    EncoderTrace { hidden, output }
}

/// e_u = tanh(W2ᵀ tanh(W1ᵀ x_u + b1) + b2) for a dense input vector.
pub fn encode_user(p: &EncoderParams, x: ArrayView1<f64>) -> Result<Array1<f64>> {
    if x.len() != p.w1.nrows() {
        return Err(Error::Shape(format!(
            "input has {} items, encoder expects {}",
            x.len(),
            p.w1.nrows()
        )));
    }
    Ok(second_layer(p, p.w1.t().dot(&x) + &p.b1).output)
}

/// Same as [`encode_user`] for a binary input given as its sorted item list.
pub fn encode_items(p: &EncoderParams, items: &[usize]) -> EncoderTrace {
    let mut pre1 = p.b1.clone();
    for &i in items {
        pre1 += &p.w1.row(i);
    }
    second_layer(p, pre1)
}

/// First layer only: tanh(W1ᵀ x_u + b1), as used during pre-training.
pub fn encode_first_layer(p: &EncoderParams, items: &[usize]) -> Array1<f64> {
    let mut pre1 = p.b1.clone();
    for &i in items {
        pre1 += &p.w1.row(i);
    }
    pre1.mapv(f64::tanh)
}

/// Accumulates encoder parameter gradients for one user given dL/de_u.
pub fn encoder_backward(
    p: &EncoderParams,
    items: &[usize],
    trace: &EncoderTrace,
    d_out: ArrayView1<f64>,
    grads: &mut EncoderParams,
) {
    let d_pre2 = &d_out * &trace.output.mapv(|e| 1.0 - e * e);
    let hidden_col = trace.hidden.view().insert_axis(Axis(1));
    let d_pre2_row = d_pre2.view().insert_axis(Axis(0));
    grads.w2 += &hidden_col.dot(&d_pre2_row);
    grads.b2 += &d_pre2;
    let d_hidden = p.w2.dot(&d_pre2);
    let d_pre1 = &d_hidden * &trace.hidden.mapv(|h| 1.0 - h * h);
    for &i in items {
        let mut row = grads.w1.row_mut(i);
        row += &d_pre1;
    }
    grads.b1 += &d_pre1;
}
