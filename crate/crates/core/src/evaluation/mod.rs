//! Ranking metrics, group analytics and evaluation reports.

mod analytics;
mod metrics;
mod report;

pub use analytics::{
    aggregate_diversity, assign_bins, binary_pearson, group_coherence, mi_variation, percentile,
    population_std, quartiles, size_bin, Characteristic, QUARTILE_LABELS, SIZE_BIN_LABELS,
};
pub use metrics::{ndcg_at_k, recall_at_k, RankedList};
pub use report::{BinRow, GroupEval, KMetrics, MetricReport, MiSummary, DEFAULT_KS, REPORT_FORMAT_VERSION};

use ndarray::{Array1, ArrayView1};

use crate::data::{GroupRecord, InteractionMatrix};
use crate::error::{Error, Result};
use crate::model::math::ordered_sum;
use crate::model::{aggregate, encode_items, item_logits, ModelState};

fn check_members(group: &GroupRecord, users: &InteractionMatrix) -> Result<()> {
    match group.members.iter().find(|&&u| u >= users.num_rows()) {
        Some(&u) => Err(Error::OutOfRange {
            what: "user",
            index: u,
            limit: users.num_rows(),
        }),
        None => Ok(()),
    }
}

/// Group embedding e_g from the members' interaction histories.
pub fn group_embedding(model: &ModelState, group: &GroupRecord, users: &InteractionMatrix) -> Result<Array1<f64>> {
    check_members(group, users)?;
    let embeddings: Vec<_> = group
        .members
        .iter()
        .map(|&u| encode_items(&model.encoder, users.row(u)).output)
        .collect();
    let views: Vec<ArrayView1<f64>> = embeddings.iter().map(|e| e.view()).collect();
    aggregate(&model.aggregator, &views)
}

/// All items ranked by the group head's logits W_I e_g.
pub fn rank_items(model: &ModelState, group: &GroupRecord, users: &InteractionMatrix) -> Result<RankedList> {
    let e_g = group_embedding(model, group, users)?;
    let logits = item_logits(&model.predictor, e_g.view())?;
    Ok(RankedList::from_scores(logits.as_slice().expect("contiguous logits")))
}

/// Evaluates an arbitrary ranking function; `mi` optionally supplies the
/// per-group MI variation.
pub fn evaluate_rankings<F>(groups: &[GroupRecord], users: &InteractionMatrix, ks: &[usize], mut rank: F) -> Result<MetricReport>
where
    F: FnMut(&GroupRecord) -> Result<(RankedList, Option<f64>)>,
{
    if ks.is_empty() {
        return Err(Error::invalid("at least one cutoff K is required"));
    }
    let mut rows = Vec::with_capacity(groups.len());
    for g in groups {
        check_members(g, users)?;
        let (ranked, mi) = rank(g)?;
        let recall = ks.iter().map(|&k| recall_at_k(&ranked, &g.items, k)).collect::<Result<Vec<_>>>()?;
        let ndcg = ks.iter().map(|&k| ndcg_at_k(&ranked, &g.items, k)).collect::<Result<Vec<_>>>()?;
        rows.push(GroupEval {
            group_id: g.group_id,
            size: g.size(),
            coherence: group_coherence(g, users)?,
            diversity: aggregate_diversity(g, users),
            mi_variation: mi,
            recall,
            ndcg,
        });
    }
    MetricReport::from_groups(ks, rows)
}

/// Recall@K and NDCG@K of the model's group rankings, with per-group
/// characteristics and MI variation.
pub fn evaluate(model: &ModelState, groups: &[GroupRecord], users: &InteractionMatrix, ks: &[usize]) -> Result<MetricReport> {
    evaluate_rankings(groups, users, ks, |g| {
        Ok((rank_items(model, g, users)?, Some(mi_variation(model, g, users)?)))
    })
}

/// Mean NDCG@k over `groups`.
pub fn mean_ndcg_at_k(model: &ModelState, groups: &[GroupRecord], users: &InteractionMatrix, k: usize) -> Result<f64> {
    if groups.is_empty() {
        return Err(Error::invalid("no groups to evaluate"));
    }
    let scores = groups
        .iter()
        .map(|g| ndcg_at_k(&rank_items(model, g, users)?, &g.items, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(ordered_sum(scores) / groups.len() as f64)
}
