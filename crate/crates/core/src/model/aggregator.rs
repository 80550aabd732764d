//! Permutation-invariant group preference aggregators.
//!
//! All reductions over members go through [`ordered_sum`] or max, so the
//! group embedding is bitwise identical for any member ordering.

use ndarray::{Array1, ArrayView1, Axis};

use super::math::ordered_sum;
use super::{AggregatorKind, AggregatorParams};
use crate::error::{Error, Result};

/// Per-member activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct AggregatorTrace {
    /// Transformed members: tanh(W e_u + b) for pooling, W e_u for attention.
    pub transformed: Vec<Array1<f64>>,
    /// Attention weights; empty for pooling kinds.
    pub weights: Vec<f64>,
    pub output: Array1<f64>,
}

fn transform(p: &AggregatorParams, e: ArrayView1<f64>) -> Array1<f64> {
    let lin = p.weight.dot(&e);
    match &p.bias {
        Some(b) => (lin + b).mapv(f64::tanh),
        None => lin,
    }
}

fn check(p: &AggregatorParams, members: &[ArrayView1<f64>]) -> Result<()> {
    if members.is_empty() {
        return Err(Error::invalid("cannot aggregate an empty member list"));
    }
    let d = p.weight.ncols();
    if let Some(m) = members.iter().find(|m| m.len() != d) {
        return Err(Error::Shape(format!("member embedding has {} dims, expected {d}", m.len())));
    }
    Ok(())
}

fn softmax_weights(query: &Array1<f64>, transformed: &[Array1<f64>]) -> Vec<f64> {
    let logits: Vec<f64> = transformed.iter().map(|v| query.dot(v)).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z = ordered_sum(exps.iter().copied());
    exps.into_iter().map(|e| e / z).collect()
}

pub fn aggregate_traced(p: &AggregatorParams, members: &[ArrayView1<f64>]) -> Result<AggregatorTrace> {
    check(p, members)?;
    let transformed: Vec<Array1<f64>> = members.iter().map(|e| transform(p, *e)).collect();
    let d = p.weight.nrows();
    let n = transformed.len() as f64;
    let (weights, output) = match p.kind {
        AggregatorKind::MaxPool => (
            Vec::new(),
            Array1::from_shape_fn(d, |k| {
                transformed.iter().map(|z| z[k]).fold(f64::NEG_INFINITY, f64::max)
            }),
        ),
        AggregatorKind::MeanPool => (
            Vec::new(),
            Array1::from_shape_fn(d, |k| ordered_sum(transformed.iter().map(|z| z[k])) / n),
        ),
        AggregatorKind::Attention => {
            let query = p
                .query
                .as_ref()
                .ok_or_else(|| Error::Shape("attention aggregator without query".into()))?;
            let w = softmax_weights(query, &transformed);
            let out = Array1::from_shape_fn(d, |k| {
                ordered_sum(w.iter().zip(&transformed).map(|(a, z)| a * z[k]))
            });
            (w, out)
        }
    };
    Ok(AggregatorTrace {
        transformed,
        weights,
        output,
    })
}

/// Group embedding e_g from member embeddings.
pub fn aggregate(p: &AggregatorParams, members: &[ArrayView1<f64>]) -> Result<Array1<f64>> {
    Ok(aggregate_traced(p, members)?.output)
}

/// Attention weights α_u over members; errors for pooling aggregators.
pub fn attention_weights(p: &AggregatorParams, members: &[ArrayView1<f64>]) -> Result<Vec<f64>> {
    if p.kind != AggregatorKind::Attention {
        return Err(Error::invalid(format!("{} aggregator has no attention weights", p.kind)));
    }
    Ok(aggregate_traced(p, members)?.weights)
}

/// Accumulates aggregator gradients given dL/de_g and returns dL/de_u per member.
pub fn aggregator_backward(
    p: &AggregatorParams,
    members: &[ArrayView1<f64>],
    trace: &AggregatorTrace,
    d_out: ArrayView1<f64>,
    grads: &mut AggregatorParams,
) -> Vec<Array1<f64>> {
    let n = members.len();
    // dL/d(pre-activation or linear output) per member
    let d_lin: Vec<Array1<f64>> = match p.kind {
        AggregatorKind::MaxPool | AggregatorKind::MeanPool => {
            let d_z: Vec<Array1<f64>> = if p.kind == AggregatorKind::MaxPool {
                let mut d_z = vec![Array1::zeros(d_out.len()); n];
                for k in 0..d_out.len() {
                    let winner = (0..n)
                        .find(|&u| trace.transformed[u][k] == trace.output[k])
                        .expect("max is attained");
                    d_z[winner][k] = d_out[k];
                }
                d_z
            } else {
                vec![d_out.to_owned() / n as f64; n]
            };
            d_z.into_iter()
                .zip(&trace.transformed)
                .map(|(dz, z)| dz * z.mapv(|v| 1.0 - v * v))
                .collect()
        }
        AggregatorKind::Attention => {
            let query = p.query.as_ref().expect("attention query");
            let proj: Vec<f64> = trace.transformed.iter().map(|v| d_out.dot(v)).collect();
            let mean_proj: f64 = trace.weights.iter().zip(&proj).map(|(a, g)| a * g).sum();
            let d_logits: Vec<f64> = trace
                .weights
                .iter()
                .zip(&proj)
                .map(|(a, g)| a * (g - mean_proj))
                .collect();
            let gq = grads.query.as_mut().expect("attention query grad");
            for (dl, v) in d_logits.iter().zip(&trace.transformed) {
                gq.scaled_add(*dl, v);
            }
            trace
                .weights
                .iter()
                .zip(&d_logits)
                .map(|(a, dl)| d_out.to_owned() * *a + query * *dl)
                .collect()
        }
    };

    let mut d_members = Vec::with_capacity(n);
    for (dl, e) in d_lin.iter().zip(members) {
        grads.weight += &dl.view().insert_axis(Axis(1)).dot(&e.insert_axis(Axis(0)));
        if let Some(b) = grads.bias.as_mut() {
            *b += dl;
        }
        d_members.push(p.weight.t().dot(dl));
    }
    d_members
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn params(kind: AggregatorKind, weight: Array2<f64>) -> AggregatorParams {
        let d = weight.nrows();
        AggregatorParams {
            kind,
            weight,
            bias: (kind != AggregatorKind::Attention).then(|| Array1::zeros(d)),
            query: (kind == AggregatorKind::Attention).then(|| Array1::from_elem(d, 0.7)),
        }
    }

    #[test]
    fn two_member_pooling_by_hand() {
        let (a, b) = (array![0.5, 0.0], array![0.0, 0.5]);
        let members = [a.view(), b.view()];
        let t = 0.5f64.tanh();
        let mean = aggregate(&params(AggregatorKind::MeanPool, Array2::eye(2)), &members).unwrap();
        assert!((mean[0] - t / 2.0).abs() < 1e-15 && (mean[1] - t / 2.0).abs() < 1e-15);
        assert!((mean[0] - 0.2311).abs() < 5e-5);
        let max = aggregate(&params(AggregatorKind::MaxPool, Array2::eye(2)), &members).unwrap();
        assert_eq!(max, array![t, t]);
    }

    #[test]
    fn singleton_member() {
        let w = array![[0.2, -0.4], [0.9, 0.1]];
        let e = array![0.3, -0.6];
        let expect_pool = w.dot(&e).mapv(f64::tanh);
        for kind in [AggregatorKind::MaxPool, AggregatorKind::MeanPool] {
            assert_eq!(aggregate(&params(kind, w.clone()), &[e.view()]).unwrap(), expect_pool);
        }
        let p = params(AggregatorKind::Attention, w.clone());
        assert_eq!(attention_weights(&p, &[e.view()]).unwrap(), vec![1.0]);
        assert_eq!(aggregate(&p, &[e.view()]).unwrap(), w.dot(&e));
    }

    #[test]
    fn attention_weight_edge_cases() {
        let mut p = params(AggregatorKind::Attention, array![[1.0, 0.5], [-0.3, 2.0]]);
        let e = array![0.4, 0.1];
        let w = attention_weights(&p, &[e.view(), e.view(), e.view()]).unwrap();
        assert!(w.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));

        p.query = Some(Array1::zeros(2));
        let (a, b) = (array![0.9, -0.2], array![-0.5, 0.3]);
        let w = attention_weights(&p, &[a.view(), b.view()]).unwrap();
        assert_eq!(w, vec![0.5, 0.5]);
    }

    #[test]
    fn attention_weights_wrong_kind() {
        let p = params(AggregatorKind::MaxPool, Array2::eye(2));
        let e = array![0.1, 0.2];
        assert!(attention_weights(&p, &[e.view()]).is_err());
    }

    #[test]
    fn empty_members_rejected() {
        for kind in AggregatorKind::ALL {
            assert!(aggregate(&params(kind, Array2::eye(2)), &[]).is_err());
        }
    }

    #[test]
    fn reversed_members_identical() {
        let w = array![[0.3, -1.1, 0.2], [0.5, 0.4, -0.7], [1.3, 0.0, 0.6]];
        let ms = [array![0.1, -0.9, 0.3], array![0.8, 0.2, -0.4], array![-0.5, 0.5, 0.5]];
        let fwd: Vec<_> = ms.iter().map(|m| m.view()).collect();
        let rev: Vec<_> = ms.iter().rev().map(|m| m.view()).collect();
        for kind in AggregatorKind::ALL {
            let p = params(kind, w.clone());
            assert_eq!(aggregate(&p, &fwd).unwrap(), aggregate(&p, &rev).unwrap());
        }
    }
}
