use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::{GroupRecord, InteractionMatrix};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// Train/validation/test partition of groups sharing one user matrix.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<GroupRecord>,
    pub val: Vec<GroupRecord>,
    pub test: Vec<GroupRecord>,
    pub users: InteractionMatrix,
}

pub const DEFAULT_RATIOS: [f64; 3] = [0.7, 0.1, 0.2];

/// Largest-remainder apportionment of `n` units over `ratios`.
/// Ties in the fractional part go to the earlier slot.
pub fn largest_remainder(n: usize, ratios: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut sizes: Vec<usize> = quotas.iter().map(|q| (q + 1e-9).floor() as usize).collect();
    let mut rest = n.saturating_sub(sizes.iter().sum());
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - sizes[a] as f64;
        let fb = quotas[b] - sizes[b] as f64;
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &slot in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        sizes[slot] += 1;
        rest -= 1;
    }
    sizes
}

/// Splits groups so that every member set lives in exactly one partition.
///
/// Groups sharing a member set are bucketed together, buckets are shuffled
/// with `seed` and apportioned by largest remainder over bucket counts.
pub fn split_groups(
    groups: &[GroupRecord],
    users: &InteractionMatrix,
    ratios: [f64; 3],
    seed: u64,
) -> Result<DatasetSplit> {
    if ratios.iter().any(|&r| !r.is_finite() || r <= 0.0) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "split ratios must be positive and sum to 1, got {ratios:?}"
        )));
    }

    let mut index: BTreeMap<&[usize], usize> = BTreeMap::new();
    let mut buckets: Vec<Vec<&GroupRecord>> = Vec::new();
    for g in groups {
        let b = *index.entry(g.members.as_slice()).or_insert_with(|| {
            buckets.push(Vec::new());
            buckets.len() - 1
        });
        buckets[b].push(g);
    }
    if buckets.len() < 3 {
        return Err(Error::invalid(format!(
            "need at least 3 distinct member sets to split, got {}",
            buckets.len()
        )));
    }

    let mut rng = stream_rng(seed, Stream::Split, &[]);
    buckets.shuffle(&mut rng);
    let sizes = largest_remainder(buckets.len(), &ratios);

    let mut parts: [Vec<GroupRecord>; 3] = Default::default();
    let mut it = buckets.into_iter();
    for (part, &n) in parts.iter_mut().zip(&sizes) {
        for bucket in it.by_ref().take(n) {
            part.extend(bucket.into_iter().cloned());
        }
    }
    let [train, val, test] = parts;
    Ok(DatasetSplit {
        train,
        val,
        test,
        users: users.clone(),
    })
}
