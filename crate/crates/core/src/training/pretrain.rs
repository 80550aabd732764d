//! Pre-training of the first encoder layer on individual interactions.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;

use super::optimizer::{adam_update, AdamConfig, Moments};
use super::TrainConfig;
use crate::data::InteractionMatrix;
use crate::error::{Error, Result};
use crate::model::math::{log_softmax, softmax};
use crate::model::{init_params, ModelDims};
use crate::rng::{stream_rng, Stream};

/// Single-layer user model tanh(W1ᵀ x_u + b1) with its own item head.
#[derive(Debug, Clone, PartialEq)]
pub struct PretrainedEncoder {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    /// |I| x D
    pub head: Array2<f64>,
}

impl PretrainedEncoder {
    /// Starting point shared with [`init_params`] for the same seed, so that
    /// zero pre-training epochs leave W1 and b1 exactly at their initial values.
    pub fn initial(num_items: usize, cfg: &TrainConfig) -> Result<Self> {
        let dims = ModelDims {
            num_items,
            embed_dim: cfg.embed_dim,
            aggregator: cfg.aggregator,
        };
        let state = init_params(dims, cfg.hyper(), cfg.seed)?;
        Ok(Self {
            w1: state.encoder.w1,
            b1: state.encoder.b1,
            head: state.predictor.weight,
        })
    }

    pub fn embed(&self, items: &[usize]) -> Array1<f64> {
        let mut pre = self.b1.clone();
        for &i in items {
            pre += &self.w1.row(i);
        }
        pre.mapv(f64::tanh)
    }

    /// π(e_u) under the pre-training head.
    pub fn user_scores(&self, items: &[usize]) -> Array1<f64> {
        softmax(self.head.dot(&self.embed(items)).view())
    }

    /// L_U summed over `batch` and its gradient (dW1, db1, dhead).
    pub fn loss_and_grad(
        &self,
        users: &InteractionMatrix,
        batch: &[usize],
    ) -> (f64, [Array2<f64>; 2], Array1<f64>) {
        let mut d_w1 = Array2::zeros(self.w1.raw_dim());
        let mut d_head = Array2::zeros(self.head.raw_dim());
        let mut d_b1 = Array1::zeros(self.b1.raw_dim());
        let mut loss = 0.0;
        for &u in batch {
            let items = users.row(u);
            if items.is_empty() {
                continue;
            }
            let h = self.embed(items);
            let log_p = log_softmax(self.head.dot(&h).view());
            let inv = 1.0 / items.len() as f64;
            loss -= items.iter().map(|&i| log_p[i]).sum::<f64>() * inv;
            let mut d_logits = log_p.mapv(f64::exp);
            for &i in items {
                d_logits[i] -= inv;
            }
            d_head += &d_logits.view().insert_axis(Axis(1)).dot(&h.view().insert_axis(Axis(0)));
            let d_pre = self.head.t().dot(&d_logits) * h.mapv(|v| 1.0 - v * v);
            for &i in items {
                let mut row = d_w1.row_mut(i);
                row += &d_pre;
            }
            d_b1 += &d_pre;
        }
        (loss, [d_w1, d_head], d_b1)
    }

    /// Mean per-user L_U over all users with interactions.
    pub fn mean_user_loss(&self, users: &InteractionMatrix) -> f64 {
        let active: Vec<usize> = (0..users.num_rows()).filter(|&u| users.row_len(u) > 0).collect();
        self.loss_and_grad(users, &active).0 / active.len().max(1) as f64
    }
}

/// Optimizes the single-layer model under L_U with Adam over shuffled user
/// mini-batches and returns it; W1 and b1 seed the full encoder.
pub fn pretrain_encoder(users: &InteractionMatrix, cfg: &TrainConfig) -> Result<PretrainedEncoder> {
    let active: Vec<usize> = (0..users.num_rows()).filter(|&u| users.row_len(u) > 0).collect();
    if active.is_empty() {
        return Err(Error::invalid("cannot pre-train on an empty interaction matrix"));
    }
    let mut model = PretrainedEncoder::initial(users.num_items(), cfg)?;
    let adam = AdamConfig {
        learning_rate: cfg.pretrain_learning_rate,
        beta1: cfg.adam_betas.0,
        beta2: cfg.adam_betas.1,
        eps: cfg.adam_eps,
    };
    let mut states: [Moments; 3] = Default::default();
    let mut t = 0;
    for epoch in 0..cfg.pretrain_epochs {
        let mut order = active.clone();
        order.shuffle(&mut stream_rng(cfg.seed, Stream::Pretrain, &[epoch as u64]));
        for batch in order.chunks(cfg.batch_size_users) {
            let (loss, [d_w1, d_head], d_b1) = model.loss_and_grad(users, batch);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            t += 1;
            let [s_w1, s_b1, s_head] = &mut states;
            adam_update(model.w1.as_slice_mut().unwrap(), d_w1.as_slice().unwrap(), s_w1, t, &adam);
            adam_update(model.b1.as_slice_mut().unwrap(), d_b1.as_slice().unwrap(), s_b1, t, &adam);
            adam_update(model.head.as_slice_mut().unwrap(), d_head.as_slice().unwrap(), s_head, t, &adam);
        }
    }
    Ok(model)
}
