//! Group characteristics: coherence, aggregate diversity, MI variation, and
//! binning of per-group metrics by those characteristics.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::data::{sorted_intersection_len, GroupRecord, InteractionMatrix};
use crate::error::{Error, Result};
use crate::model::math::ordered_sum;
use crate::model::{aggregate, discriminate, encode_items, ModelState};

/// Pearson correlation of two binary vectors over `n` items given as sorted
/// index lists; zero when either vector has zero variance.
pub fn binary_pearson(a: &[usize], b: &[usize], n: usize) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let nf = n as f64;
    let var_a = na * (nf - na);
    let var_b = nb * (nf - nb);
    if var_a == 0.0 || var_b == 0.0 {
        return 0.0;
    }
    let both = sorted_intersection_len(a, b) as f64;
    (nf * both - na * nb) / (var_a * var_b).sqrt()
}

/// Mean pairwise Pearson correlation of the members' interaction vectors.
pub fn group_coherence(group: &GroupRecord, users: &InteractionMatrix) -> Result<f64> {
    if group.members.len() < 2 {
        return Err(Error::invalid("coherence needs at least two members"));
    }
    let m = &group.members;
    let mut pairs = Vec::new();
    for i in 0..m.len() {
        for j in i + 1..m.len() {
            pairs.push(binary_pearson(users.row(m[i]), users.row(m[j]), users.num_items()));
        }
    }
    let n = pairs.len() as f64;
    Ok(ordered_sum(pairs) / n)
}

/// Number of distinct items across all members' histories.
pub fn aggregate_diversity(group: &GroupRecord, users: &InteractionMatrix) -> usize {
    group
        .members
        .iter()
        .flat_map(|&u| users.row(u).iter().copied())
        .collect::<BTreeSet<_>>()
        .len()
}

/// Population standard deviation of D(e_u, e_g) over the members.
pub fn mi_variation(model: &ModelState, group: &GroupRecord, users: &InteractionMatrix) -> Result<f64> {
    if group.members.is_empty() {
        return Err(Error::invalid("group has no members"));
    }
    let embeddings: Vec<_> = group
        .members
        .iter()
        .map(|&u| encode_items(&model.encoder, users.row(u)).output)
        .collect();
    let views: Vec<ArrayView1<f64>> = embeddings.iter().map(|e| e.view()).collect();
    let e_g = aggregate(&model.aggregator, &views)?;
    let scores = views
        .iter()
        .map(|e| discriminate(&model.discriminator, *e, e_g.view()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(population_std(&scores))
}

pub fn population_std(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = ordered_sum(values.iter().copied()) / n;
    (ordered_sum(values.iter().map(|v| (v - mean) * (v - mean))) / n).sqrt()
}

/// Linear-interpolation percentile of an already sorted slice, `q` in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Characteristic {
    Size,
    Coherence,
    Diversity,
}

impl fmt::Display for Characteristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Size => "size",
            Self::Coherence => "coherence",
            Self::Diversity => "diversity",
        })
    }
}

impl FromStr for Characteristic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "size" => Ok(Self::Size),
            "coherence" => Ok(Self::Coherence),
            "diversity" => Ok(Self::Diversity),
            _ => Err(Error::invalid(format!("unknown bin characteristic `{s}`"))),
        }
    }
}

pub const SIZE_BIN_LABELS: [&str; 5] = ["2-3", "4-5", "6-7", "8-9", ">=10"];
pub const QUARTILE_LABELS: [&str; 4] = ["Q1", "Q2", "Q3", "Q4"];

pub fn size_bin(size: usize) -> usize {
    match size {
        0..=3 => 0,
        4..=5 => 1,
        6..=7 => 2,
        8..=9 => 3,
        _ => 4,
    }
}

/// Quartile index (0..4) per value. Boundaries are the values at ranks
/// ceil(k·n/4) of the sorted population; a value equal to a boundary goes
/// to the lower quartile.
pub fn quartiles(values: &[f64]) -> Vec<usize> {
    let n = values.len();
    if n == 0 {
        return Vec::new();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let bounds: Vec<f64> = (1..4).map(|k| sorted[(k * n).div_ceil(4) - 1]).collect();
    values
        .iter()
        .map(|v| bounds.iter().position(|b| v.total_cmp(b).is_le()).unwrap_or(3))
        .collect()
}

/// Bin index and label set for each value of a characteristic.
pub fn assign_bins(characteristic: Characteristic, values: &[f64]) -> (Vec<usize>, Vec<&'static str>) {
    match characteristic {
        Characteristic::Size => (
            values.iter().map(|&v| size_bin(v as usize)).collect(),
            SIZE_BIN_LABELS.to_vec(),
        ),
        _ => (quartiles(values), QUARTILE_LABELS.to_vec()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        if va == 0.0 || vb == 0.0 {
            0.0
        } else {
            cov / (va * vb).sqrt()
        }
    }

    #[test]
    fn pearson_matches_dense_oracle() {
        assert_eq!(binary_pearson(&[0, 2], &[0, 3], 4), 0.0);
        assert_eq!(dense_pearson(&[1., 0., 1., 0.], &[1., 0., 0., 1.]), 0.0);
        let cases: [(&[usize], &[usize]); 4] = [(&[0, 1, 4], &[1, 4, 5]), (&[2], &[0, 1, 2, 3]), (&[0, 1], &[4, 5]), (&[], &[1])];
        for (a, b) in cases {
            let dense = |s: &[usize]| (0..6).map(|i| if s.contains(&i) { 1.0 } else { 0.0 }).collect::<Vec<_>>();
            let expect = dense_pearson(&dense(a), &dense(b));
            assert!((binary_pearson(a, b, 6) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn coherence_examples() {
        let users = InteractionMatrix::from_rows(4, vec![vec![0, 2], vec![0, 2], vec![0, 3], vec![]]).unwrap();
        let same = GroupRecord::new(0, vec![0, 1], vec![1]);
        assert!((group_coherence(&same, &users).unwrap() - 1.0).abs() < 1e-12);
        let zero = GroupRecord::new(0, vec![0, 2], vec![1]);
        assert_eq!(group_coherence(&zero, &users).unwrap(), 0.0);
        // pairs (0,1)=1, (0,3)=0, (1,3)=0
        let with_empty = GroupRecord::new(0, vec![0, 1, 3], vec![1]);
        assert!((group_coherence(&with_empty, &users).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        let single = GroupRecord {
            group_id: 0,
            members: vec![0],
            items: vec![1],
        };
        assert!(group_coherence(&single, &users).is_err());
    }

    #[test]
    fn diversity_examples() {
        let users = InteractionMatrix::from_rows(6, vec![vec![1, 2], vec![2, 3], vec![4, 5], vec![1, 2]]).unwrap();
        assert_eq!(aggregate_diversity(&GroupRecord::new(0, vec![0, 1], vec![0]), &users), 3);
        assert_eq!(aggregate_diversity(&GroupRecord::new(0, vec![0, 2], vec![0]), &users), 4);
        assert_eq!(aggregate_diversity(&GroupRecord::new(0, vec![0, 3], vec![0]), &users), 2);
    }

    #[test]
    fn std_examples() {
        assert!((population_std(&[0.2, 0.8]) - 0.3).abs() < 1e-12);
        assert_eq!(population_std(&[0.7]), 0.0);
        assert!(population_std(&[0.4, 0.4, 0.4]) < 1e-15);
    }

    #[test]
    fn quartiles_even_split_and_ties() {
        let v = [0.8, 0.1, 0.5, 0.3, 0.9, 0.2, 0.7, 0.6];
        let q = quartiles(&v);
        for k in 0..4 {
            assert_eq!(q.iter().filter(|&&x| x == k).count(), 2);
        }
        assert_eq!(q[1], 0);
        assert_eq!(q[4], 3);
        assert_eq!(quartiles(&[1.0; 5]), vec![0; 5]);
    }

    #[test]
    fn size_bins() {
        assert_eq!([2, 3, 4, 5, 6, 7, 8, 9, 10, 40].map(size_bin), [0, 0, 1, 1, 2, 2, 3, 3, 4, 4]);
    }

    #[test]
    fn percentile_interpolates() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&s, 0.5), 2.5);
        assert_eq!(percentile(&s, 0.0), 1.0);
        assert_eq!(percentile(&s, 1.0), 4.0);
    }
}
