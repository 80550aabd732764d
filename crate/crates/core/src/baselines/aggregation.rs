use std::fmt;
use std::str::FromStr;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::data::{GroupRecord, InteractionMatrix};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_rankings, MetricReport, RankedList};
use crate::model::math::ordered_sum;
use crate::training::PretrainedEncoder;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StrategyKind {
    #[serde(rename = "AVG")]
    Avg,
    /// least misery
    #[serde(rename = "LM")]
    Lm,
    /// maximum satisfaction
    #[serde(rename = "MAX")]
    Max,
    /// relevance minus disagreement
    #[serde(rename = "RD")]
    Rd,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [Self::Avg, Self::Lm, Self::Max, Self::Rd];

    pub fn name(self) -> &'static str {
        match self {
            Self::Avg => "AVG",
            Self::Lm => "LM",
            Self::Max => "MAX",
            Self::Rd => "RD",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown aggregation strategy `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregationStrategy {
    pub kind: StrategyKind,
    pub w_rel: f64,
    pub w_dis: f64,
}

impl AggregationStrategy {
    pub fn new(kind: StrategyKind) -> Self {
        Self {
            kind,
            w_rel: 1.0,
            w_dis: 1.0,
        }
    }

    pub fn rd(w_rel: f64, w_dis: f64) -> Result<Self> {
        if !(w_rel >= 0.0 && w_dis >= 0.0) {
            return Err(Error::invalid("RD weights must be nonnegative"));
        }
        Ok(Self {
            kind: StrategyKind::Rd,
            w_rel,
            w_dis,
        })
    }
}

/// Combines per-member item scores into one group score vector.
pub fn score_aggregate(user_scores: &[Array1<f64>], strategy: AggregationStrategy) -> Result<Array1<f64>> {
    let first = user_scores.first().ok_or_else(|| Error::invalid("no member scores to aggregate"))?;
    let n = first.len();
    if user_scores.iter().any(|s| s.len() != n) {
        return Err(Error::Shape("member score vectors differ in length".into()));
    }
    let count = user_scores.len() as f64;
    let column = |i: usize| user_scores.iter().map(move |s| s[i]);
    let out = (0..n).map(|i| match strategy.kind {
        StrategyKind::Avg => ordered_sum(column(i)) / count,
        StrategyKind::Lm => column(i).fold(f64::INFINITY, f64::min),
        StrategyKind::Max => column(i).fold(f64::NEG_INFINITY, f64::max),
        StrategyKind::Rd => {
            let relevance = ordered_sum(column(i)) / count;
            let mut gaps = Vec::new();
            for a in 0..user_scores.len() {
                for b in a + 1..user_scores.len() {
                    gaps.push((user_scores[a][i] - user_scores[b][i]).abs());
                }
            }
            let disagreement = if gaps.is_empty() {
                0.0
            } else {
                let pairs = gaps.len() as f64;
                ordered_sum(gaps) / pairs
            };
            strategy.w_rel * relevance - strategy.w_dis * disagreement
        }
    });
    Ok(out.collect())
}

/// π(e_u) of the pre-trained single-layer model for user `u`.
pub fn user_scores_from_encoder(encoder: &PretrainedEncoder, u: usize, users: &InteractionMatrix) -> Result<Array1<f64>> {
    if u >= users.num_rows() {
        return Err(Error::OutOfRange {
            what: "user",
            index: u,
            limit: users.num_rows(),
        });
    }
    Ok(encoder.user_scores(users.row(u)))
}

/// Ranking from aggregated member predictions.
pub fn rank_by_aggregation(
    encoder: &PretrainedEncoder,
    group: &GroupRecord,
    users: &InteractionMatrix,
    strategy: AggregationStrategy,
) -> Result<RankedList> {
    let scores = group
        .members
        .iter()
        .map(|&u| user_scores_from_encoder(encoder, u, users))
        .collect::<Result<Vec<_>>>()?;
    let combined = score_aggregate(&scores, strategy)?;
    Ok(RankedList::from_scores(combined.as_slice().expect("contiguous scores")))
}

pub fn evaluate_aggregation(
    encoder: &PretrainedEncoder,
    groups: &[GroupRecord],
    users: &InteractionMatrix,
    ks: &[usize],
    strategy: AggregationStrategy,
) -> Result<MetricReport> {
    evaluate_rankings(groups, users, ks, |g| Ok((rank_by_aggregation(encoder, g, users, strategy)?, None)))
}
