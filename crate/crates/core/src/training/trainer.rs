//! Alternating optimization: a recommender step on L_G + λ L_UG (or λ L_U)
//! with the discriminator frozen, then a discriminator step on L_MI that also
//! updates the encoder and aggregator. Both steps run once per mini-batch.

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::optimizer::{Adam, AdamConfig};
use super::pretrain::pretrain_encoder;
use super::TrainConfig;
use crate::data::{DatasetSplit, GroupRecord, InteractionMatrix};
use crate::error::{Error, Result};
use crate::evaluation::mean_ndcg_at_k;
use crate::model::{init_params, ModelDims, ModelState, ParamId};
use crate::objectives::{evaluate_objective, sample_negatives, Batch, LossMode, Terms};
use crate::rng::{stream_rng, Stream};

/// Cutoff used for validation-based model selection.
pub const SELECTION_K: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-group L_G.
    pub l_g: f64,
    /// Mean per-user L_U (zero unless the mode uses it).
    pub l_u: f64,
    /// Mean per-group L_UG.
    pub l_ug: f64,
    /// Mean per-group L_MI.
    pub l_mi: f64,
    pub total: f64,
    pub val_ndcg20: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub seed: u64,
    pub mode: LossMode,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned (None: the initial state).
    pub best_epoch: Option<usize>,
}

impl TrainLog {
    /// One JSON object per epoch.
    pub fn to_jsonl(&self) -> String {
        self.epochs
            .iter()
            .map(|e| serde_json::to_string(e).expect("plain record serializes") + "\n")
            .collect()
    }

    /// Copy with wall-clock fields zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        let mut out = self.clone();
        for e in &mut out.epochs {
            e.seconds = 0.0;
        }
        out
    }
}

/// Raw loss sums from one mini-batch.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BatchLosses {
    pub l_g: f64,
    pub l_u: f64,
    pub l_ug: f64,
    /// Mean over the batch's groups.
    pub l_mi: f64,
    pub groups: usize,
    pub users: usize,
}

fn adam_config(cfg: &TrainConfig) -> AdamConfig {
    AdamConfig {
        learning_rate: cfg.learning_rate,
        beta1: cfg.adam_betas.0,
        beta2: cfg.adam_betas.1,
        eps: cfg.adam_eps,
    }
}

/// Fresh parameters, with W1 and b1 taken from pre-training when enabled.
pub fn initial_state(users: &InteractionMatrix, cfg: &TrainConfig) -> Result<ModelState> {
    let dims = ModelDims {
        num_items: users.num_items(),
        embed_dim: cfg.embed_dim,
        aggregator: cfg.aggregator,
    };
    let mut model = init_params(dims, cfg.hyper(), cfg.seed)?;
    if cfg.pretrain && cfg.pretrain_epochs > 0 {
        let pre = pretrain_encoder(users, cfg)?;
        model.encoder.w1 = pre.w1;
        model.encoder.b1 = pre.b1;
    }
    Ok(model)
}

pub struct Trainer<'a> {
    model: ModelState,
    cfg: TrainConfig,
    users: &'a InteractionMatrix,
    recommender_opt: Adam,
    discriminator_opt: Adam,
    active_users: Vec<usize>,
}

impl<'a> Trainer<'a> {
    pub fn new(model: ModelState, cfg: TrainConfig, users: &'a InteractionMatrix) -> Result<Self> {
        cfg.validate()?;
        model.validate()?;
        if model.num_items() != users.num_items() {
            return Err(Error::Shape(format!(
                "model has {} items, data has {}",
                model.num_items(),
                users.num_items()
            )));
        }
        let adam = adam_config(&cfg);
        let active_users = (0..users.num_rows()).filter(|&u| users.row_len(u) > 0).collect();
        Ok(Self {
            model,
            cfg,
            users,
            recommender_opt: Adam::new(adam),
            discriminator_opt: Adam::new(adam),
            active_users,
        })
    }

    pub fn model(&self) -> &ModelState {
        &self.model
    }

    pub fn into_model(self) -> ModelState {
        self.model
    }

    fn negatives_for(&self, groups: &[&GroupRecord], epoch: usize) -> Result<Vec<Vec<usize>>> {
        groups
            .iter()
            .map(|g| {
                let mut rng = stream_rng(self.cfg.seed, Stream::Negatives, &[epoch as u64, g.group_id]);
                sample_negatives(g, self.users, self.cfg.eta, self.cfg.negatives_per_member, &mut rng)
            })
            .collect()
    }

    /// Runs both optimization steps on one batch of groups. `user_batch`
    /// feeds L_U and is ignored by modes that do not use it.
    pub fn train_batch(
        &mut self,
        groups: &[&GroupRecord],
        user_batch: &[usize],
        epoch: usize,
    ) -> Result<BatchLosses> {
        let mode = self.cfg.mode;
        let mut rec_terms = mode.terms(self.cfg.lambda);
        rec_terms.mi = 0.0;
        let batch = Batch {
            groups: groups.to_vec(),
            negatives: Vec::new(),
            users: if mode.uses_user_loss() { user_batch.to_vec() } else { Vec::new() },
        };
        let rec = evaluate_objective(&self.model, self.users, &batch, &rec_terms, None)?;
        if !rec.total.is_finite() || !rec.gradients.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        self.recommender_opt
            .step(&mut self.model, &rec.gradients, ParamId::in_recommender_step);

        let mut out = BatchLosses {
            l_g: rec.l_g,
            l_u: rec.l_u,
            l_ug: rec.l_ug,
            l_mi: 0.0,
            groups: groups.len(),
            users: batch.users.len(),
        };

        if mode.uses_mi() {
            let batch = Batch {
                groups: groups.to_vec(),
                negatives: self.negatives_for(groups, epoch)?,
                users: Vec::new(),
            };
            let mi = evaluate_objective(&self.model, self.users, &batch, &Terms::only_mi(), None)?;
            if !mi.total.is_finite() || !mi.gradients.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            self.discriminator_opt
                .step(&mut self.model, &mi.gradients, ParamId::in_discriminator_step);
            out.l_mi = mi.l_mi;
        }
        Ok(out)
    }

    /// One pass over `train` in a seeded shuffled order.
    pub fn run_epoch(&mut self, train: &[GroupRecord], epoch: usize) -> Result<EpochRecord> {
        let start = Instant::now();
        let mut order: Vec<&GroupRecord> = train.iter().collect();
        order.shuffle(&mut stream_rng(self.cfg.seed, Stream::Shuffle, &[epoch as u64]));
        let mut user_order = self.active_users.clone();
        user_order.shuffle(&mut stream_rng(self.cfg.seed, Stream::UserBatches, &[epoch as u64]));

        let mut sums = BatchLosses::default();
        for (b, chunk) in order.chunks(self.cfg.batch_size_groups).enumerate() {
            let user_batch: Vec<usize> = if user_order.is_empty() {
                Vec::new()
            } else {
                (0..self.cfg.batch_size_users.min(user_order.len()))
                    .map(|k| user_order[(b * self.cfg.batch_size_users + k) % user_order.len()])
                    .collect()
            };
            let l = self.train_batch(chunk, &user_batch, epoch)?;
            sums.l_g += l.l_g;
            sums.l_u += l.l_u;
            sums.l_ug += l.l_ug;
            sums.l_mi += l.l_mi * l.groups as f64;
            sums.groups += l.groups;
            sums.users += l.users;
        }
        let n = sums.groups.max(1) as f64;
        let (l_g, l_ug, l_mi) = (sums.l_g / n, sums.l_ug / n, sums.l_mi / n);
        let l_u = sums.l_u / sums.users.max(1) as f64;
        let terms = self.cfg.mode.terms(self.cfg.lambda);
        let total = l_g + terms.user * l_u + terms.context * l_ug + terms.mi * l_mi;
        if !total.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        Ok(EpochRecord {
            epoch,
            l_g,
            l_u,
            l_ug,
            l_mi,
            total,
            val_ndcg20: None,
            seconds: start.elapsed().as_secs_f64(),
        })
    }
}

/// Trains from `initial` and returns the epoch state with the best
/// validation NDCG@20 (the last epoch when there is no validation set).
pub fn train_from(split: &DatasetSplit, cfg: &TrainConfig, initial: ModelState) -> Result<(ModelState, TrainLog)> {
    if split.train.is_empty() {
        return Err(Error::invalid("no training groups"));
    }
    for g in split.train.iter().chain(&split.val) {
        g.validate(&split.users)?;
    }
    let mut trainer = Trainer::new(initial, cfg.clone(), &split.users)?;
    let mut log = TrainLog {
        seed: cfg.seed,
        mode: cfg.mode,
        epochs: Vec::with_capacity(cfg.epochs),
        best_epoch: None,
    };
    let mut best: Option<(f64, ModelState)> = None;
    for epoch in 1..=cfg.epochs {
        let mut rec = trainer.run_epoch(&split.train, epoch)?;
        let score = if split.val.is_empty() {
            None
        } else {
            Some(mean_ndcg_at_k(trainer.model(), &split.val, &split.users, SELECTION_K)?)
        };
        rec.val_ndcg20 = score;
        let s = score.unwrap_or(f64::NEG_INFINITY);
        if best.as_ref().is_none_or(|(b, _)| s > *b || score.is_none()) {
            best = Some((s, trainer.model().clone()));
            log.best_epoch = Some(epoch);
        }
        log.epochs.push(rec);
    }
    let model = match best {
        Some((_, m)) => m,
        None => trainer.into_model(),
    };
    Ok((model, log))
}

/// Initializes (pre-training if configured) and trains.
pub fn train(split: &DatasetSplit, cfg: &TrainConfig) -> Result<(ModelState, TrainLog)> {
    cfg.validate()?;
    let initial = initial_state(&split.users, cfg)?;
    train_from(split, cfg, initial)
}
