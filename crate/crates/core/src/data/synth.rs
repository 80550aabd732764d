//! Clustered synthetic data for desk-scale experiments.

use rand::Rng;

use super::{GroupRecord, InteractionMatrix};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_items: usize,
    pub n_groups: usize,
    pub n_clusters: usize,
    /// Probability of interacting with any out-of-cluster item.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_users: 200,
            n_items: 100,
            n_groups: 500,
            n_clusters: 4,
            noise: 0.05,
            seed: 0,
        }
    }
}

/// Peak in-cluster interaction probability (the cluster's most popular item).
const IN_CLUSTER_PEAK: f64 = 0.5;
/// Probability that a group slot is filled from the group's dominant cluster.
const DOMINANT_MEMBER_PROB: f64 = 0.75;
const MIN_GROUP_SIZE: usize = 2;
const MAX_GROUP_SIZE: usize = 6;
const MAX_GROUP_ITEMS: usize = 3;

pub fn user_cluster(u: usize, n_clusters: usize) -> usize {
    u % n_clusters
}

pub fn item_cluster(i: usize, n_clusters: usize) -> usize {
    i % n_clusters
}

/// In-cluster interaction probability, decaying linearly with the item's
/// popularity rank inside its cluster.
fn in_cluster_prob(i: usize, n_items: usize, k: usize) -> f64 {
    let c = item_cluster(i, k);
    let size = (n_items - c).div_ceil(k);
    let rank = i / k;
    IN_CLUSTER_PEAK * (1.0 - 0.8 * rank as f64 / size as f64)
}

fn weighted_pick<R: Rng>(rng: &mut R, candidates: &[(usize, f64)]) -> Option<usize> {
    let total: f64 = candidates.iter().map(|(_, w)| w).sum();
    if candidates.is_empty() || total <= 0.0 {
        return None;
    }
    let mut x = rng.gen::<f64>() * total;
    for &(c, w) in candidates {
        if x < w {
            return Some(c);
        }
        x -= w;
    }
    candidates.last().map(|&(c, _)| c)
}

/// Generates users and items in latent clusters plus cluster-biased groups.
///
/// Users favour their own cluster's items (popularity-skewed) and touch other
/// items with probability `noise`. Each group draws 2-6 members, most from one
/// dominant cluster; its 1-3 items are picked from the dominant members'
/// in-cluster histories weighted by how many of them share each item.
pub fn synthesize_dataset(cfg: &SynthConfig) -> Result<(InteractionMatrix, Vec<GroupRecord>)> {
    let k = cfg.n_clusters;
    if k == 0 || k > cfg.n_users.min(cfg.n_items) {
        return Err(Error::invalid(format!(
            "n_clusters must be in 1..=min(n_users, n_items), got {k}"
        )));
    }
    if !(0.0..=1.0).contains(&cfg.noise) {
        return Err(Error::invalid("noise must be a probability"));
    }
    if cfg.n_users < MIN_GROUP_SIZE {
        return Err(Error::invalid("need at least two users"));
    }
    let mut rng = stream_rng(cfg.seed, Stream::Synth, &[]);

    let mut rows = Vec::with_capacity(cfg.n_users);
    for u in 0..cfg.n_users {
        let c = user_cluster(u, k);
        let mut row: Vec<usize> = (0..cfg.n_items)
            .filter(|&i| {
                let p = if item_cluster(i, k) == c {
                    in_cluster_prob(i, cfg.n_items, k)
                } else {
                    cfg.noise
                };
                rng.gen::<f64>() < p
            })
            .collect();
        if !row.iter().any(|&i| item_cluster(i, k) == c) {
            // cluster's most popular item
            row.push(c);
            row.sort_unstable();
        }
        rows.push(row);
    }
    let users = InteractionMatrix::from_rows(cfg.n_items, rows)?;

    let cluster_users: Vec<Vec<usize>> = (0..k)
        .map(|c| (0..cfg.n_users).filter(|&u| user_cluster(u, k) == c).collect())
        .collect();

    let mut groups = Vec::with_capacity(cfg.n_groups);
    for gid in 0..cfg.n_groups {
        let c = rng.gen_range(0..k);
        let size = rng.gen_range(MIN_GROUP_SIZE..=MAX_GROUP_SIZE).min(cfg.n_users);
        let mut members: Vec<usize> = Vec::with_capacity(size);
        let mut attempts = 0;
        while members.len() < size {
            attempts += 1;
            let u = if attempts > 100 {
                rng.gen_range(0..cfg.n_users)
            } else if k == 1 || rng.gen::<f64>() < DOMINANT_MEMBER_PROB {
                cluster_users[c][rng.gen_range(0..cluster_users[c].len())]
            } else {
                rng.gen_range(0..cfg.n_users)
            };
            if !members.contains(&u) {
                members.push(u);
            }
        }

        let dominant: Vec<usize> = members
            .iter()
            .copied()
            .filter(|&u| user_cluster(u, k) == c)
            .collect();
        let mut votes = vec![0.0; cfg.n_items];
        for &u in &dominant {
            for &i in users.row(u) {
                if item_cluster(i, k) == c {
                    votes[i] += 1.0;
                }
            }
        }
        let mut candidates: Vec<(usize, f64)> = votes
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(i, &v)| (i, v * v))
            .collect();
        if candidates.is_empty() {
            candidates = (0..cfg.n_items)
                .filter(|&i| item_cluster(i, k) == c)
                .map(|i| (i, in_cluster_prob(i, cfg.n_items, k)))
                .collect();
        }

        let n_items = rng.gen_range(1..=MAX_GROUP_ITEMS);
        let mut items = Vec::with_capacity(n_items);
        for _ in 0..n_items {
            let item = if rng.gen::<f64>() < cfg.noise {
                Some(rng.gen_range(0..cfg.n_items))
            } else {
                weighted_pick(&mut rng, &candidates)
            };
            items.extend(item);
        }
        groups.push(GroupRecord::new(gid as u64, members, items));
    }
    Ok((users, groups))
}
