use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AggregatorKind, Hyper};
use crate::objectives::LossMode;

/// Smallest and largest λ of the tuning sweep {2^-4, ..., 2^6}.
pub const LAMBDA_RANGE: (f64, f64) = (0.0625, 64.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub embed_dim: usize,
    pub lambda: f64,
    pub eta: f64,
    pub negatives_per_member: usize,
    pub aggregator: AggregatorKind,
    pub learning_rate: f64,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    pub epochs: usize,
    pub pretrain_epochs: usize,
    pub pretrain_learning_rate: f64,
    pub batch_size_groups: usize,
    pub batch_size_users: usize,
    pub seed: u64,
    pub mode: LossMode,
    pub pretrain: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            embed_dim: 64,
            lambda: 1.0,
            eta: 0.5,
            negatives_per_member: 5,
            aggregator: AggregatorKind::Attention,
            learning_rate: 1e-3,
            adam_betas: (0.9, 0.999),
            adam_eps: 1e-8,
            epochs: 30,
            pretrain_epochs: 20,
            pretrain_learning_rate: 1e-3,
            batch_size_groups: 32,
            batch_size_users: 64,
            seed: 0,
            mode: LossMode::GroupimFull,
            pretrain: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::invalid(m));
        if self.embed_dim == 0 {
            return fail("embed_dim must be positive".into());
        }
        if !(self.lambda == 0.0 || (LAMBDA_RANGE.0..=LAMBDA_RANGE.1).contains(&self.lambda)) {
            return fail(format!("lambda {} outside the sweep range 2^-4..2^6", self.lambda));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return fail(format!("eta {} is not a probability", self.eta));
        }
        if self.mode.uses_mi() && self.negatives_per_member == 0 {
            return fail("negatives_per_member must be positive".into());
        }
        if [self.learning_rate, self.pretrain_learning_rate].iter().any(|&r| !r.is_finite() || r <= 0.0) {
            return fail("learning rates must be positive".into());
        }
        let (b1, b2) = self.adam_betas;
        if !(0.0..1.0).contains(&b1) || !(0.0..1.0).contains(&b2) || !self.adam_eps.is_finite() || self.adam_eps <= 0.0 {
            return fail("invalid Adam hyperparameters".into());
        }
        if self.batch_size_groups == 0 || self.batch_size_users == 0 {
            return fail("batch sizes must be positive".into());
        }
        Ok(())
    }

    pub fn hyper(&self) -> Hyper {
        Hyper {
            embed_dim: self.embed_dim,
            lambda: self.lambda,
            eta: self.eta,
            negatives_per_member: self.negatives_per_member,
        }
    }
}
