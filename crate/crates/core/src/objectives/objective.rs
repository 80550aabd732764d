//! Batched loss assembly with exact analytic gradients.
//!
//! Every term accumulates into dL/de_u (per user) and dL/de_g (per group);
//! group gradients are pushed through the aggregator into member gradients,
//! and member gradients through the encoder, in a fixed order so results are
//! bitwise reproducible.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use super::softplus_bce;
use crate::data::{sorted_intersection_len, GroupRecord, InteractionMatrix};
use crate::error::{Error, Result};
use crate::model::math::{log_softmax, sigmoid};
use crate::model::{
    aggregate_traced, aggregator_backward, bilinear_score, discriminator_backward, encode_items,
    encoder_backward, item_logits, predictor_backward, AggregatorTrace, EncoderTrace, Gradients,
    ModelState,
};

/// Objective variants, one per ablation row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LossMode {
    /// L_G
    #[serde(rename = "base_LG")]
    BaseLg,
    /// L_G + λ L_U
    #[serde(rename = "base_LG_LU")]
    BaseLgLu,
    /// L_G + L_MI
    #[serde(rename = "groupim_LG_MI")]
    GroupimLgMi,
    /// L_G + λ L_UG + L_MI with discriminator weights
    #[serde(rename = "groupim_full")]
    GroupimFull,
    /// L_UG with w(u,g) = 1
    #[serde(rename = "uniform_w")]
    UniformW,
    /// L_UG with w(u,g) = cos(x_u, x_g)
    #[serde(rename = "cosine_w")]
    CosineW,
}

impl LossMode {
    pub const ALL: [LossMode; 6] = [
        Self::BaseLg,
        Self::BaseLgLu,
        Self::GroupimLgMi,
        Self::GroupimFull,
        Self::UniformW,
        Self::CosineW,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::BaseLg => "base_LG",
            Self::BaseLgLu => "base_LG_LU",
            Self::GroupimLgMi => "groupim_LG_MI",
            Self::GroupimFull => "groupim_full",
            Self::UniformW => "uniform_w",
            Self::CosineW => "cosine_w",
        }
    }

    pub fn uses_mi(self) -> bool {
        matches!(self, Self::GroupimLgMi | Self::GroupimFull | Self::UniformW | Self::CosineW)
    }

    pub fn uses_user_loss(self) -> bool {
        self == Self::BaseLgLu
    }

    pub fn context_weighting(self) -> Option<ContextWeighting> {
        match self {
            Self::GroupimFull => Some(ContextWeighting::Discriminator),
            Self::UniformW => Some(ContextWeighting::Uniform),
            Self::CosineW => Some(ContextWeighting::Cosine),
            _ => None,
        }
    }

    /// Term coefficients of the full objective for this mode.
    pub fn terms(self, lambda: f64) -> Terms {
        Terms {
            group: 1.0,
            user: if self.uses_user_loss() { lambda } else { 0.0 },
            context: if self.context_weighting().is_some() { lambda } else { 0.0 },
            mi: if self.uses_mi() { 1.0 } else { 0.0 },
            weighting: self.context_weighting().unwrap_or(ContextWeighting::Discriminator),
        }
    }
}

impl fmt::Display for LossMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown loss mode `{s}`")))
    }
}

/// How w(u,g) is obtained inside L_UG.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContextWeighting {
    /// D(e_u, e_g), treated as a constant for differentiation.
    Discriminator,
    Uniform,
    /// cos(x_u, x_g) clamped to [0, 1].
    Cosine,
}

/// Coefficients applied to each raw loss term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Terms {
    pub group: f64,
    pub user: f64,
    pub context: f64,
    pub mi: f64,
    pub weighting: ContextWeighting,
}

impl Terms {
    pub fn only_group() -> Self {
        Self {
            group: 1.0,
            user: 0.0,
            context: 0.0,
            mi: 0.0,
            weighting: ContextWeighting::Discriminator,
        }
    }

    pub fn only_user() -> Self {
        Self {
            group: 0.0,
            user: 1.0,
            ..Self::only_group()
        }
    }

    pub fn only_context(weighting: ContextWeighting) -> Self {
        Self {
            group: 0.0,
            context: 1.0,
            weighting,
            ..Self::only_group()
        }
    }

    pub fn only_mi() -> Self {
        Self {
            group: 0.0,
            mi: 1.0,
            ..Self::only_group()
        }
    }
}

/// One mini-batch: groups, sampled negatives (for L_MI) and users (for L_U).
#[derive(Debug, Clone, Default)]
pub struct Batch<'a> {
    pub groups: Vec<&'a GroupRecord>,
    /// Per-group non-member users; required when the MI term is active.
    pub negatives: Vec<Vec<usize>>,
    /// Users contributing to L_U.
    pub users: Vec<usize>,
}

/// Raw (unscaled) term values plus the scaled total and its gradient.
#[derive(Debug, Clone)]
pub struct LossReport {
    pub l_g: f64,
    pub l_u: f64,
    pub l_ug: f64,
    pub l_mi: f64,
    pub total: f64,
    pub gradients: Gradients,
    /// w(u,g) used in L_UG, per group and member (empty if L_UG inactive).
    pub context_weights: Vec<Vec<f64>>,
}

/// Cosine similarity of two binary item sets, clamped to [0, 1].
pub fn cosine_weight(a: &[usize], b: &[usize]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let dot = sorted_intersection_len(a, b) as f64;
    (dot / ((a.len() * b.len()) as f64).sqrt()).clamp(0.0, 1.0)
}

struct GroupForward {
    trace: AggregatorTrace,
    log_probs: Option<Array1<f64>>,
}

/// Evaluates the selected terms on a batch and their gradient with respect to
/// every learnable tensor.
///
/// `frozen_weights`, when given, replaces the L_UG weights (one vector per
/// group, one entry per member); finite-difference checks use this to hold
/// the stop-gradient weights fixed while parameters move.
pub fn evaluate_objective(
    model: &ModelState,
    users: &InteractionMatrix,
    batch: &Batch<'_>,
    terms: &Terms,
    frozen_weights: Option<&[Vec<f64>]>,
) -> Result<LossReport> {
    let need_mi = terms.mi != 0.0;
    let need_ctx = terms.context != 0.0;
    let need_user = terms.user != 0.0;
    let need_probs = terms.group != 0.0 || need_ctx;
    if need_mi && batch.negatives.len() != batch.groups.len() {
        return Err(Error::invalid("MI term requires negatives for every group"));
    }
    if let Some(w) = frozen_weights {
        if w.len() != batch.groups.len()
            || w.iter().zip(&batch.groups).any(|(w, g)| w.len() != g.size())
        {
            return Err(Error::Shape("frozen weights do not match batch".into()));
        }
    }
    for g in &batch.groups {
        if g.items.is_empty() {
            return Err(Error::invalid(format!("group {} has no items", g.group_id)));
        }
        if let Some(&u) = g.members.iter().find(|&&u| u >= users.num_rows()) {
            return Err(Error::OutOfRange {
                what: "user",
                index: u,
                limit: users.num_rows(),
            });
        }
    }

    // user forward passes
    let mut encoded: BTreeMap<usize, EncoderTrace> = BTreeMap::new();
    let mut needed: Vec<usize> = batch.groups.iter().flat_map(|g| g.members.iter().copied()).collect();
    if need_mi {
        needed.extend(batch.negatives.iter().flatten().copied());
    }
    if need_user {
        needed.extend(batch.users.iter().copied());
    }
    for u in needed {
        if u >= users.num_rows() {
            return Err(Error::OutOfRange {
                what: "user",
                index: u,
                limit: users.num_rows(),
            });
        }
        encoded
            .entry(u)
            .or_insert_with(|| encode_items(&model.encoder, users.row(u)));
    }

    // group forward passes
    let mut groups = Vec::with_capacity(batch.groups.len());
    for g in &batch.groups {
        let members: Vec<ArrayView1<f64>> = g.members.iter().map(|u| encoded[u].output.view()).collect();
        let trace = aggregate_traced(&model.aggregator, &members)?;
        let log_probs = if need_probs {
            Some(log_softmax(item_logits(&model.predictor, trace.output.view())?.view()))
        } else {
            None
        };
        groups.push(GroupForward { trace, log_probs });
    }

    let mut grads = Gradients::zeros_like(model);
    let d = model.embed_dim();
    let mut d_user: BTreeMap<usize, Array1<f64>> = encoded.keys().map(|&u| (u, Array1::zeros(d))).collect();
    let mut d_group: Vec<Array1<f64>> = vec![Array1::zeros(d); groups.len()];
    let (mut l_g, mut l_u, mut l_ug, mut l_mi) = (0.0, 0.0, 0.0, 0.0);
    let mut context_weights = Vec::new();

    // L_G and L_UG share the group's item head: accumulate target mass c_i and
    // backprop d logits = (Σc) π − c once.
    if need_probs {
        for (gi, (g, fwd)) in batch.groups.iter().zip(&groups).enumerate() {
            let log_p = fwd.log_probs.as_ref().expect("probabilities computed");
            let n_items = log_p.len();
            let inv = 1.0 / g.items.len() as f64;
            let mut target = Array1::<f64>::zeros(n_items);

            let lg: f64 = -g.items.iter().map(|&i| log_p[i]).sum::<f64>() * inv;
            l_g += lg;
            for &i in &g.items {
                target[i] += terms.group * inv;
            }

            if need_ctx {
                let weights: Vec<f64> = match frozen_weights {
                    Some(w) => w[gi].clone(),
                    None => context_weights_for(model, users, g, &encoded, &fwd.trace.output, terms.weighting)?,
                };
                let mut lug = 0.0;
                for (&u, &w) in g.members.iter().zip(&weights) {
                    for &i in users.row(u) {
                        lug -= w * inv * log_p[i];
                        target[i] += terms.context * w * inv;
                    }
                }
                l_ug += lug;
                context_weights.push(weights);
            }

            let mass = target.sum();
            if mass != 0.0 {
                let d_logits = log_p.mapv(f64::exp) * mass - &target;
                let de = predictor_backward(&model.predictor, fwd.trace.output.view(), d_logits.view(), &mut grads.predictor);
                d_group[gi] += &de;
            }
        }
    }

    if need_user {
        for &u in &batch.users {
            let items = users.row(u);
            if items.is_empty() {
                return Err(Error::invalid(format!("user {u} has no interactions")));
            }
            let e = &encoded[&u].output;
            let log_p = log_softmax(item_logits(&model.predictor, e.view())?.view());
            let inv = 1.0 / items.len() as f64;
            l_u -= items.iter().map(|&i| log_p[i]).sum::<f64>() * inv;
            let mut d_logits = log_p.mapv(f64::exp) * terms.user;
            for &i in items {
                d_logits[i] -= terms.user * inv;
            }
            let de = predictor_backward(&model.predictor, e.view(), d_logits.view(), &mut grads.predictor);
            *d_user.get_mut(&u).expect("encoded") += &de;
        }
    }

    if need_mi {
        let n_groups = batch.groups.len() as f64;
        for (gi, (g, fwd)) in batch.groups.iter().zip(&groups).enumerate() {
            let negs = &batch.negatives[gi];
            let alpha = (g.size() + negs.len()) as f64;
            let scale = terms.mi / (alpha * n_groups);
            let e_g = fwd.trace.output.view();
            let mut lmi = 0.0;
            let pairs = g.members.iter().map(|&u| (u, true)).chain(negs.iter().map(|&u| (u, false)));
            for (u, positive) in pairs {
                let e_u = encoded[&u].output.view();
                let s = bilinear_score(&model.discriminator, e_u, e_g)?;
                lmi += softplus_bce(s, positive);
                // d/ds softplus(-s) = -(1-σ(s)); d/ds softplus(s) = σ(s)
                let ds = (if positive { -sigmoid(-s) } else { sigmoid(s) }) * scale;
                let (du, dg) = discriminator_backward(&model.discriminator, e_u, e_g, ds, &mut grads.discriminator);
                *d_user.get_mut(&u).expect("encoded") += &du;
                d_group[gi] += &dg;
            }
            l_mi += lmi / alpha;
        }
        l_mi /= n_groups;
    }

    for ((g, fwd), dg) in batch.groups.iter().zip(&groups).zip(&d_group) {
        if dg.iter().all(|&v| v == 0.0) {
            continue;
        }
        let members: Vec<ArrayView1<f64>> = g.members.iter().map(|u| encoded[u].output.view()).collect();
        let d_members = aggregator_backward(&model.aggregator, &members, &fwd.trace, dg.view(), &mut grads.aggregator);
        for (u, dm) in g.members.iter().zip(d_members) {
            *d_user.get_mut(u).expect("encoded") += &dm;
        }
    }

    for (u, du) in &d_user {
        if du.iter().all(|&v| v == 0.0) {
            continue;
        }
        encoder_backward(&model.encoder, users.row(*u), &encoded[u], du.view(), &mut grads.encoder);
    }

    let total = terms.group * l_g + terms.user * l_u + terms.context * l_ug + terms.mi * l_mi;
    Ok(LossReport {
        l_g,
        l_u,
        l_ug,
        l_mi,
        total,
        gradients: grads,
        context_weights,
    })
}

fn context_weights_for(
    model: &ModelState,
    users: &InteractionMatrix,
    g: &GroupRecord,
    encoded: &BTreeMap<usize, EncoderTrace>,
    e_g: &Array1<f64>,
    weighting: ContextWeighting,
) -> Result<Vec<f64>> {
    g.members
        .iter()
        .map(|&u| match weighting {
            ContextWeighting::Uniform => Ok(1.0),
            ContextWeighting::Cosine => Ok(cosine_weight(users.row(u), &g.items)),
            ContextWeighting::Discriminator => {
                bilinear_score(&model.discriminator, encoded[&u].output.view(), e_g.view()).map(sigmoid)
            }
        })
        .collect()
}

/// Assembles the objective of `mode` (with the model's λ) on a batch.
pub fn combined_loss(
    model: &ModelState,
    users: &InteractionMatrix,
    batch: &Batch<'_>,
    mode: LossMode,
) -> Result<LossReport> {
    evaluate_objective(model, users, batch, &mode.terms(model.hyper.lambda), None)
}
