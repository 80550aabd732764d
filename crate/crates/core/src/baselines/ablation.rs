use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::DatasetSplit;
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, REPORT_FORMAT_VERSION};
use crate::model::math::ordered_sum;
use crate::objectives::LossMode;
use crate::training::{train, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AblationVariant {
    #[serde(rename = "base_LG")]
    BaseLg,
    #[serde(rename = "base_LG_LU")]
    BaseLgLu,
    #[serde(rename = "groupim_LG_MI")]
    GroupimLgMi,
    #[serde(rename = "uniform_w")]
    UniformW,
    #[serde(rename = "cosine_w")]
    CosineW,
    /// full objective from a random first layer
    #[serde(rename = "no_pretrain")]
    NoPretrain,
    #[serde(rename = "full")]
    Full,
}

impl AblationVariant {
    pub const ALL: [AblationVariant; 7] = [
        Self::BaseLg,
        Self::BaseLgLu,
        Self::GroupimLgMi,
        Self::UniformW,
        Self::CosineW,
        Self::NoPretrain,
        Self::Full,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::BaseLg => "base_LG",
            Self::BaseLgLu => "base_LG_LU",
            Self::GroupimLgMi => "groupim_LG_MI",
            Self::UniformW => "uniform_w",
            Self::CosineW => "cosine_w",
            Self::NoPretrain => "no_pretrain",
            Self::Full => "full",
        }
    }

    pub fn mode(self) -> LossMode {
        match self {
            Self::BaseLg => LossMode::BaseLg,
            Self::BaseLgLu => LossMode::BaseLgLu,
            Self::GroupimLgMi => LossMode::GroupimLgMi,
            Self::UniformW => LossMode::UniformW,
            Self::CosineW => LossMode::CosineW,
            Self::NoPretrain | Self::Full => LossMode::GroupimFull,
        }
    }

    /// `base` with this variant's objective and pre-training flag.
    pub fn configure(self, base: &TrainConfig) -> TrainConfig {
        TrainConfig {
            mode: self.mode(),
            pretrain: base.pretrain && self != Self::NoPretrain,
            ..base.clone()
        }
    }

    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(str::parse).collect()
    }
}

impl fmt::Display for AblationVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AblationVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("groupim_full") {
            return Ok(Self::Full);
        }
        Self::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown ablation variant `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: AblationVariant,
    pub seed: u64,
    pub best_epoch: Option<usize>,
    pub ndcg: BTreeMap<usize, f64>,
    pub recall: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationMean {
    pub variant: AblationVariant,
    pub ndcg: BTreeMap<usize, f64>,
    pub recall: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub format_version: u32,
    pub ks: Vec<usize>,
    pub seeds: Vec<u64>,
    pub rows: Vec<AblationRow>,
    pub means: Vec<AblationMean>,
}

impl AblationTable {
    pub fn mean(&self, variant: AblationVariant) -> Option<&AblationMean> {
        self.means.iter().find(|m| m.variant == variant)
    }

    /// Mean NDCG@k of `a` minus that of `b`.
    pub fn ndcg_delta(&self, a: AblationVariant, b: AblationVariant, k: usize) -> Option<f64> {
        Some(self.mean(a)?.ndcg.get(&k)? - self.mean(b)?.ndcg.get(&k)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Per-seed rows followed by one `mean` row per variant.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("variant,seed");
        for k in &self.ks {
            let _ = write!(out, ",ndcg@{k},recall@{k}");
        }
        out.push('\n');
        let mut line = |variant: AblationVariant, seed: String, ndcg: &BTreeMap<usize, f64>, recall: &BTreeMap<usize, f64>| {
            let _ = write!(out, "{variant},{seed}");
            for k in &self.ks {
                let _ = write!(out, ",{},{}", ndcg[k], recall[k]);
            }
            out.push('\n');
        };
        for r in &self.rows {
            line(r.variant, r.seed.to_string(), &r.ndcg, &r.recall);
        }
        for m in &self.means {
            line(m.variant, "mean".into(), &m.ndcg, &m.recall);
        }
        out
    }
}

/// Trains every variant under every seed on the same split and evaluates
/// on the test groups.
pub fn run_ablation(
    split: &DatasetSplit,
    base: &TrainConfig,
    variants: &[AblationVariant],
    seeds: &[u64],
    ks: &[usize],
) -> Result<AblationTable> {
    if seeds.is_empty() {
        return Err(Error::invalid("ablation needs at least one seed"));
    }
    if variants.is_empty() {
        return Err(Error::invalid("ablation needs at least one variant"));
    }
    let mut rows = Vec::new();
    for &variant in variants {
        for &seed in seeds {
            let cfg = TrainConfig {
                seed,
                ..variant.configure(base)
            };
            let (model, log) = train(split, &cfg)?;
            let report = evaluate(&model, &split.test, &split.users, ks)?;
            rows.push(AblationRow {
                variant,
                seed,
                best_epoch: log.best_epoch,
                ndcg: report.k.iter().map(|(&k, m)| (k, m.ndcg)).collect(),
                recall: report.k.iter().map(|(&k, m)| (k, m.recall)).collect(),
            });
        }
    }
    let mut means = Vec::new();
    for &variant in variants {
        if means.iter().any(|m: &AblationMean| m.variant == variant) {
            continue;
        }
        let mine: Vec<&AblationRow> = rows.iter().filter(|r| r.variant == variant).collect();
        let avg = |pick: &dyn Fn(&AblationRow) -> &BTreeMap<usize, f64>| {
            ks.iter()
                .map(|k| (*k, ordered_sum(mine.iter().map(|r| pick(r)[k])) / mine.len() as f64))
                .collect()
        };
        means.push(AblationMean {
            variant,
            ndcg: avg(&|r| &r.ndcg),
            recall: avg(&|r| &r.recall),
        });
    }
    Ok(AblationTable {
        format_version: REPORT_FORMAT_VERSION,
        ks: ks.to_vec(),
        seeds: seeds.to_vec(),
        rows,
        means,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variants_map_to_modes() {
        let base = TrainConfig::default();
        assert_eq!(AblationVariant::Full.configure(&base).mode, LossMode::GroupimFull);
        assert!(AblationVariant::Full.configure(&base).pretrain);
        assert!(!AblationVariant::NoPretrain.configure(&base).pretrain);
        assert_eq!(AblationVariant::NoPretrain.configure(&base).mode, LossMode::GroupimFull);
        let names: Vec<_> = AblationVariant::ALL.iter().map(|v| v.name().parse::<AblationVariant>().unwrap()).collect();
        assert_eq!(names, AblationVariant::ALL);
        assert_eq!(
            AblationVariant::parse_list("full, base_LG").unwrap(),
            vec![AblationVariant::Full, AblationVariant::BaseLg]
        );
        assert!(AblationVariant::parse_list("full,bogus").is_err());
    }
}
