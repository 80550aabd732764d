//! Scalar loss terms evaluated on probabilities, one group (or user) at a time.

use ndarray::ArrayView1;

use super::softplus_bce;
use crate::error::{Error, Result};

fn check_distribution(pi: ArrayView1<f64>, items: &[usize]) -> Result<()> {
    if items.is_empty() {
        return Err(Error::invalid("empty interaction set"));
    }
    if let Some(&i) = items.iter().find(|&&i| i >= pi.len()) {
        return Err(Error::OutOfRange {
            what: "item",
            index: i,
            limit: pi.len(),
        });
    }
    Ok(())
}

/// Multinomial negative log-likelihood normalized by |x|:
/// -(1/|x|) Σ_{i∈x} log π_i.
pub fn multinomial_nll(pi: ArrayView1<f64>, items: &[usize]) -> Result<f64> {
    check_distribution(pi, items)?;
    let n = items.len() as f64;
    Ok(-items.iter().map(|&i| pi[i].ln()).sum::<f64>() / n)
}

/// Per-group term of L_G.
pub fn group_loss(pi_g: ArrayView1<f64>, group_items: &[usize]) -> Result<f64> {
    multinomial_nll(pi_g, group_items)
}

/// Per-user term of L_U.
pub fn user_loss(pi_u: ArrayView1<f64>, user_items: &[usize]) -> Result<f64> {
    multinomial_nll(pi_u, user_items)
}

/// Per-group term of L_UG:
/// -(1/|x_g|) Σ_u w(u,g) Σ_{i∈x_u} log π_i(e_g).
pub fn weighted_user_group_loss(
    pi_g: ArrayView1<f64>,
    group_item_count: usize,
    member_items: &[&[usize]],
    weights: &[f64],
) -> Result<f64> {
    if group_item_count == 0 {
        return Err(Error::invalid("group has no items"));
    }
    if member_items.len() != weights.len() {
        return Err(Error::Shape(format!(
            "{} members but {} weights",
            member_items.len(),
            weights.len()
        )));
    }
    let mut total = 0.0;
    for (items, &w) in member_items.iter().zip(weights) {
        if let Some(&i) = items.iter().find(|&&i| i >= pi_g.len()) {
            return Err(Error::OutOfRange {
                what: "item",
                index: i,
                limit: pi_g.len(),
            });
        }
        total -= w * items.iter().map(|&i| pi_g[i].ln()).sum::<f64>();
    }
    Ok(total / group_item_count as f64)
}

/// Discriminator probabilities for one group's positive and negative pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairScores {
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
}

/// L_MI from probabilities: mean over groups of the α_g-normalized BCE,
/// α_g = |g| + M_g. Probabilities of exactly 0 or 1 are rejected; use
/// [`mi_loss_from_logits`] where saturation is possible.
pub fn mi_loss(groups: &[PairScores]) -> Result<f64> {
    if groups.is_empty() {
        return Err(Error::invalid("no groups"));
    }
    let mut total = 0.0;
    for g in groups {
        let all = g.positive.iter().chain(&g.negative);
        if let Some(s) = all.clone().find(|&&s| !(s > 0.0 && s < 1.0)) {
            return Err(Error::invalid(format!("discriminator score {s} outside (0, 1)")));
        }
        let alpha = (g.positive.len() + g.negative.len()) as f64;
        if alpha == 0.0 {
            return Err(Error::invalid("group without pairs"));
        }
        let bce: f64 = g.positive.iter().map(|s| -s.ln()).sum::<f64>()
            + g.negative.iter().map(|s| -(1.0 - s).ln()).sum::<f64>();
        total += bce / alpha;
    }
    Ok(total / groups.len() as f64)
}

/// L_MI from raw bilinear scores, computed with softplus so it stays finite.
pub fn mi_loss_from_logits(groups: &[PairScores]) -> Result<f64> {
    if groups.is_empty() {
        return Err(Error::invalid("no groups"));
    }
    let mut total = 0.0;
    for g in groups {
        let alpha = (g.positive.len() + g.negative.len()) as f64;
        if alpha == 0.0 {
            return Err(Error::invalid("group without pairs"));
        }
        let bce: f64 = g.positive.iter().map(|&s| softplus_bce(s, true)).sum::<f64>()
            + g.negative.iter().map(|&s| softplus_bce(s, false)).sum::<f64>();
        total += bce / alpha;
    }
    Ok(total / groups.len() as f64)
}
