use serde::{Deserialize, Serialize};

use super::{train, TrainConfig, TrainLog};
use crate::data::DatasetSplit;
use crate::error::{Error, Result};
use crate::model::ModelState;

/// λ ∈ {2^-4, 2^-3, …, 2^6}.
pub const LAMBDA_GRID: [f64; 11] = [0.0625, 0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaPoint {
    pub lambda: f64,
    pub val_ndcg20: f64,
    pub best_epoch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSweep {
    pub points: Vec<LambdaPoint>,
    pub best_lambda: f64,
}

impl TrainLog {
    /// Validation NDCG@20 of the selected epoch.
    pub fn best_val_ndcg20(&self) -> Option<f64> {
        let e = self.best_epoch?;
        self.epochs.get(e - 1)?.val_ndcg20
    }
}

/// Trains once per λ and keeps the model with the best validation NDCG@20;
/// ties go to the earlier λ in `lambdas`.
pub fn sweep_lambda(split: &DatasetSplit, cfg: &TrainConfig, lambdas: &[f64]) -> Result<(LambdaSweep, ModelState)> {
    if lambdas.is_empty() {
        return Err(Error::invalid("empty lambda grid"));
    }
    if split.val.is_empty() {
        return Err(Error::invalid("lambda selection needs validation groups"));
    }
    let mut points = Vec::with_capacity(lambdas.len());
    let mut best: Option<(f64, f64, ModelState)> = None;
    for &lambda in lambdas {
        let (model, log) = train(split, &TrainConfig { lambda, ..cfg.clone() })?;
        let score = log.best_val_ndcg20().unwrap_or(f64::NEG_INFINITY);
        points.push(LambdaPoint {
            lambda,
            val_ndcg20: score,
            best_epoch: log.best_epoch,
        });
        if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
            best = Some((score, lambda, model));
        }
    }
    let (_, best_lambda, model) = best.expect("non-empty grid");
    Ok((LambdaSweep { points, best_lambda }, model))
}
