//! Central finite-difference gradient checking.

use std::collections::BTreeMap;

use serde::Serialize;

use rand::Rng;

use crate::data::{GroupRecord, InteractionMatrix};
use crate::error::Result;
use crate::model::{init_params, AggregatorKind, Gradients, Hyper, ModelDims, ModelState, ParamId};
use crate::objectives::{evaluate_objective, Batch, ContextWeighting, LossMode, Terms};
use crate::rng::{stream_rng, Stream};

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_TOL: f64 = 1e-4;
pub const MAX_COORDS_PER_TENSOR: usize = 200;
/// Denominator floor so coordinates with vanishing gradients are judged on
/// absolute error instead of amplified round-off.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct TensorCheck {
    pub name: String,
    pub coords_checked: usize,
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub step: f64,
    pub tol: f64,
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.tensors.iter().all(|t| t.passed)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max)
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Evenly spaced coordinate subsample, all coordinates when `len <= max`.
pub fn sample_coords(len: usize, max: usize) -> Vec<usize> {
    if len <= max {
        return (0..len).collect();
    }
    let mut out: Vec<usize> = (0..max).map(|k| k * len / max).collect();
    out.dedup();
    out
}

/// Generic checker over flat parameter vectors: `f` evaluates the loss at a
/// point, `grad` is the analytic gradient at `x`.
pub fn check_flat(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x: &[f64],
    grad: &[f64],
    step: f64,
    tol: f64,
) -> TensorCheck {
    let mut point = x.to_vec();
    let mut worst = (0.0, 0);
    let coords = sample_coords(x.len(), MAX_COORDS_PER_TENSOR);
    for &i in &coords {
        let orig = point[i];
        point[i] = orig + step;
        let plus = f(&point);
        point[i] = orig - step;
        let minus = f(&point);
        point[i] = orig;
        let numeric = (plus - minus) / (2.0 * step);
        let err = relative_error(grad[i], numeric);
        if err > worst.0 || err.is_nan() {
            worst = (err, i);
        }
    }
    TensorCheck {
        name: String::new(),
        coords_checked: coords.len(),
        max_rel_error: worst.0,
        worst_index: worst.1,
        passed: worst.0 < tol,
    }
}

/// Checks every tensor of `model` against `grads` using the loss `f`.
pub fn gradient_check(
    model: &ModelState,
    grads: &Gradients,
    f: impl Fn(&ModelState) -> f64,
    step: f64,
    tol: f64,
) -> GradCheckReport {
    let analytic: BTreeMap<ParamId, Vec<f64>> = grads
        .tensors()
        .into_iter()
        .map(|(id, g)| (id, g.to_vec()))
        .collect();
    let ids: Vec<ParamId> = model.tensors().into_iter().map(|(id, _)| id).collect();
    let mut tensors = Vec::new();
    for id in ids {
        let x = model.tensor(id).expect("tensor present").to_vec();
        let mut probe = model.clone();
        let mut eval = |point: &[f64]| {
            for (pid, t) in probe.tensors_mut() {
                if pid == id {
                    t.copy_from_slice(point);
                }
            }
            f(&probe)
        };
        let mut check = check_flat(&mut eval, &x, &analytic[&id], step, tol);
        check.name = id.name().to_string();
        tensors.push(check);
    }
    GradCheckReport { step, tol, tensors }
}

/// Loss terms covered by [`check_objective_terms`].
pub const TERM_NAMES: [&str; 5] = ["L_G", "L_U", "L_UG", "L_MI", "combined"];

#[derive(Debug, Clone, Serialize)]
pub struct TermCheck {
    pub aggregator: AggregatorKind,
    pub term: &'static str,
    pub report: GradCheckReport,
}

/// Fixed 3-group toy problem: 6 users over 7 items, with negatives drawn
/// outside each group.
pub fn toy_problem() -> (InteractionMatrix, Vec<GroupRecord>, Vec<Vec<usize>>) {
    let users = InteractionMatrix::from_rows(
        7,
        vec![vec![0, 1], vec![1, 2, 3], vec![3, 4], vec![4, 5, 6], vec![0, 6], vec![2, 5]],
    )
    .expect("valid toy matrix");
    let groups = vec![
        GroupRecord::new(0, vec![0, 1], vec![1, 2]),
        GroupRecord::new(1, vec![2, 3, 4], vec![4]),
        GroupRecord::new(2, vec![1, 5], vec![2, 5, 6]),
    ];
    let negatives = vec![vec![2, 3, 5, 4], vec![0, 1, 5, 0, 1, 5], vec![0, 2, 3, 4]];
    (users, groups, negatives)
}

/// Toy model with nonzero biases so that every parameter carries gradient.
pub fn toy_model(kind: AggregatorKind, seed: u64) -> Result<ModelState> {
    let dims = ModelDims {
        num_items: 7,
        embed_dim: 4,
        aggregator: kind,
    };
    let hyper = Hyper {
        embed_dim: 4,
        lambda: 0.7,
        negatives_per_member: 2,
        ..Hyper::default()
    };
    let mut model = init_params(dims, hyper, seed)?;
    let mut rng = stream_rng(seed, Stream::Init, &[1]);
    for (id, t) in model.tensors_mut() {
        let spread = if matches!(id, ParamId::EncoderB1 | ParamId::EncoderB2 | ParamId::AggBias) { 0.3 } else { 0.5 };
        for v in t.iter_mut() {
            *v += rng.gen_range(-spread..spread);
        }
    }
    Ok(model)
}

/// Finite-difference check of every loss term and the combined objective
/// for one aggregator kind. L_UG weights are frozen at their value at the
/// check point. `fault` scales the analytic gradient before comparison.
pub fn check_objective_terms(kind: AggregatorKind, seed: u64, fault: Option<f64>) -> Result<Vec<TermCheck>> {
    let (users, groups, negatives) = toy_problem();
    let model = toy_model(kind, seed)?;
    let batch = Batch {
        groups: groups.iter().collect(),
        negatives,
        users: (0..users.num_rows()).collect(),
    };
    let lambda = model.hyper.lambda;
    let combined = Terms {
        user: lambda,
        ..LossMode::GroupimFull.terms(lambda)
    };
    let all = [
        Terms::only_group(),
        Terms::only_user(),
        Terms::only_context(ContextWeighting::Discriminator),
        Terms::only_mi(),
        combined,
    ];
    let weights = evaluate_objective(&model, &users, &batch, &all[2], None)?.context_weights;
    let mut out = Vec::new();
    for (name, terms) in TERM_NAMES.into_iter().zip(all) {
        let frozen = (terms.context != 0.0).then_some(weights.as_slice());
        let mut grads = evaluate_objective(&model, &users, &batch, &terms, frozen)?.gradients;
        if let Some(scale) = fault {
            grads.add_scaled(&grads.clone(), scale - 1.0);
        }
        let f = |m: &ModelState| {
            evaluate_objective(m, &users, &batch, &terms, frozen)
                .map(|r| r.total)
                .unwrap_or(f64::NAN)
        };
        out.push(TermCheck {
            aggregator: kind,
            term: name,
            report: gradient_check(&model, &grads, f, DEFAULT_STEP, DEFAULT_TOL),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        // f(x) = Σ (k+1) x_k^2, ∇f = 2 (k+1) x_k
        let x: Vec<f64> = (0..10).map(|k| 0.3 * k as f64 - 1.0).collect();
        let grad: Vec<f64> = x.iter().enumerate().map(|(k, v)| 2.0 * (k + 1) as f64 * v).collect();
        let mut f = |p: &[f64]| p.iter().enumerate().map(|(k, v)| (k + 1) as f64 * v * v).sum::<f64>();
        let c = check_flat(&mut f, &x, &grad, DEFAULT_STEP, DEFAULT_TOL);
        assert!(c.max_rel_error < 1e-8, "{}", c.max_rel_error);
        assert!(c.passed);
    }

    #[test]
    fn corrupted_gradient_fails() {
        let x = vec![0.5, -2.0];
        let grad: Vec<f64> = x.iter().map(|v| 2.0 * 2.0 * v).collect();
        let mut f = |p: &[f64]| p.iter().map(|v| v * v).sum::<f64>();
        assert!(!check_flat(&mut f, &x, &grad, DEFAULT_STEP, DEFAULT_TOL).passed);
    }

    #[test]
    fn subsample_is_bounded_and_spread() {
        assert_eq!(sample_coords(5, 200), vec![0, 1, 2, 3, 4]);
        let s = sample_coords(6400, 200);
        assert_eq!(s.len(), 200);
        assert_eq!(s[0], 0);
        assert!(*s.last().unwrap() > 6300);
    }
}
