use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::analytics::{assign_bins, percentile, Characteristic};
use crate::error::{Error, Result};
use crate::model::math::ordered_sum;

pub const REPORT_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_KS: [usize; 2] = [20, 50];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMetrics {
    pub recall: f64,
    pub ndcg: f64,
}

/// Per-group metrics and characteristics; `recall` and `ndcg` are aligned
/// with [`MetricReport::ks`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupEval {
    pub group_id: u64,
    pub size: usize,
    pub coherence: f64,
    pub diversity: usize,
    pub mi_variation: Option<f64>,
    pub recall: Vec<f64>,
    pub ndcg: Vec<f64>,
}

impl GroupEval {
    pub fn characteristic(&self, c: Characteristic) -> f64 {
        match c {
            Characteristic::Size => self.size as f64,
            Characteristic::Coherence => self.coherence,
            Characteristic::Diversity => self.diversity as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    pub label: String,
    pub count: usize,
    /// Mean metrics per K; `None` for an empty bin.
    pub recall: BTreeMap<usize, Option<f64>>,
    pub ndcg: BTreeMap<usize, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiSummary {
    pub bin: String,
    pub count: usize,
    pub median: Option<f64>,
    pub iqr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub format_version: u32,
    pub ks: Vec<usize>,
    pub k: BTreeMap<usize, KMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub characteristic: Option<Characteristic>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bins: Vec<BinRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mi_variation: Vec<MiSummary>,
    #[serde(skip)]
    pub groups: Vec<GroupEval>,
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        None
    } else {
        let n = v.len() as f64;
        Some(ordered_sum(v) / n)
    }
}

impl MetricReport {
    pub fn from_groups(ks: &[usize], groups: Vec<GroupEval>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::invalid("no groups to evaluate"));
        }
        let mut k = BTreeMap::new();
        for (j, &kk) in ks.iter().enumerate() {
            let recall = mean(groups.iter().map(|g| g.recall[j])).unwrap_or(0.0);
            let ndcg = mean(groups.iter().map(|g| g.ndcg[j])).unwrap_or(0.0);
            k.insert(kk, KMetrics { recall, ndcg });
        }
        Ok(Self {
            format_version: REPORT_FORMAT_VERSION,
            ks: ks.to_vec(),
            k,
            characteristic: None,
            bins: Vec::new(),
            mi_variation: Vec::new(),
            groups,
        })
    }

    pub fn at(&self, k: usize) -> Option<KMetrics> {
        self.k.get(&k).copied()
    }

    /// Fills `bins` with mean metrics per bin of `c` and `mi_variation` with
    /// the median and IQR of per-group MI variation in each bin.
    pub fn with_bins(mut self, c: Characteristic) -> Self {
        let values: Vec<f64> = self.groups.iter().map(|g| g.characteristic(c)).collect();
        let (assignment, labels) = assign_bins(c, &values);
        self.characteristic = Some(c);
        self.bins.clear();
        self.mi_variation.clear();
        for (b, label) in labels.iter().enumerate() {
            let members: Vec<&GroupEval> = self
                .groups
                .iter()
                .zip(&assignment)
                .filter(|(_, &a)| a == b)
                .map(|(g, _)| g)
                .collect();
            let mut recall = BTreeMap::new();
            let mut ndcg = BTreeMap::new();
            for (j, &k) in self.ks.iter().enumerate() {
                recall.insert(k, mean(members.iter().map(|g| g.recall[j])));
                ndcg.insert(k, mean(members.iter().map(|g| g.ndcg[j])));
            }
            self.bins.push(BinRow {
                label: label.to_string(),
                count: members.len(),
                recall,
                ndcg,
            });
            let mut mi: Vec<f64> = members.iter().filter_map(|g| g.mi_variation).collect();
            mi.sort_by(f64::total_cmp);
            let (median, iqr) = if mi.is_empty() {
                (None, None)
            } else {
                (Some(percentile(&mi, 0.5)), Some(percentile(&mi, 0.75) - percentile(&mi, 0.25)))
            };
            self.mi_variation.push(MiSummary {
                bin: label.to_string(),
                count: mi.len(),
                median,
                iqr,
            });
        }
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per group: id, size, coherence, diversity, MI variation and
    /// recall/ndcg per K.
    pub fn groups_csv(&self) -> String {
        let mut out = String::from("group_id,size,coherence,diversity,mi_variation");
        for k in &self.ks {
            let _ = write!(out, ",recall@{k},ndcg@{k}");
        }
        out.push('\n');
        for g in &self.groups {
            let mi = g.mi_variation.map(|v| v.to_string()).unwrap_or_default();
            let _ = write!(out, "{},{},{},{},{}", g.group_id, g.size, g.coherence, g.diversity, mi);
            for (r, n) in g.recall.iter().zip(&g.ndcg) {
                let _ = write!(out, ",{r},{n}");
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(id: u64, size: usize, coherence: f64, mi: f64, ndcg: f64) -> GroupEval {
        GroupEval {
            group_id: id,
            size,
            coherence,
            diversity: size * 2,
            mi_variation: Some(mi),
            recall: vec![ndcg],
            ndcg: vec![ndcg],
        }
    }

    #[test]
    fn means_and_bins() {
        let groups = vec![g(0, 2, 0.1, 0.3, 1.0), g(1, 2, 0.2, 0.1, 0.0), g(2, 5, 0.3, 0.2, 0.5), g(3, 12, 0.4, 0.0, 0.5)];
        let r = MetricReport::from_groups(&[10], groups).unwrap();
        assert_eq!(r.at(10).unwrap().ndcg, 0.5);
        let sized = r.clone().with_bins(Characteristic::Size);
        let counts: Vec<usize> = sized.bins.iter().map(|b| b.count).collect();
        assert_eq!(counts, vec![2, 1, 0, 0, 1]);
        assert_eq!(sized.bins[0].ndcg[&10], Some(0.5));
        assert_eq!(sized.bins[2].ndcg[&10], None);
        assert!((sized.mi_variation[0].median.unwrap() - 0.2).abs() < 1e-12);
        let q = r.with_bins(Characteristic::Coherence);
        assert!(q.bins.iter().all(|b| b.count == 1));
        let json = q.to_json().unwrap();
        assert!(json.contains("\"format_version\": 1"));
        let back: MetricReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.k, q.k);
        assert_eq!(q.groups_csv().lines().count(), 5);
    }

    #[test]
    fn empty_rejected() {
        assert!(MetricReport::from_groups(&[10], Vec::new()).is_err());
    }
}
