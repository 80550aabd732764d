//! Preference-biased negative user sampling.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::data::{GroupRecord, InteractionMatrix};
use crate::error::{Error, Result};

/// Normalized P_N(ũ | g) over non-members:
/// ∝ η·1[x_ũ · x_g > 0] + (1 − η)/|U|.
pub fn negative_distribution(
    group: &GroupRecord,
    users: &InteractionMatrix,
    eta: f64,
) -> Result<Vec<(usize, f64)>> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::invalid(format!("eta must be in [0, 1], got {eta}")));
    }
    let n = users.num_rows();
    let base = (1.0 - eta) / n as f64;
    let raw: Vec<(usize, f64)> = (0..n)
        .filter(|&u| !group.is_member(u))
        .map(|u| {
            let hit = if users.overlaps(u, &group.items) { eta } else { 0.0 };
            (u, hit + base)
        })
        .collect();
    if raw.is_empty() {
        return Err(Error::invalid(format!(
            "group {} spans every user; no negatives available",
            group.group_id
        )));
    }
    let z: f64 = raw.iter().map(|(_, w)| w).sum();
    if z <= 0.0 {
        // η = 1 and nobody overlaps: fall back to uniform
        let p = 1.0 / raw.len() as f64;
        return Ok(raw.into_iter().map(|(u, _)| (u, p)).collect());
    }
    Ok(raw.into_iter().map(|(u, w)| (u, w / z)).collect())
}

/// Draws `m · |g|` non-members i.i.d. with replacement from P_N(· | g).
pub fn sample_negatives<R: Rng>(
    group: &GroupRecord,
    users: &InteractionMatrix,
    eta: f64,
    per_member: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let dist = negative_distribution(group, users, eta)?;
    let index = WeightedIndex::new(dist.iter().map(|(_, p)| *p))
        .map_err(|e| Error::invalid(format!("negative distribution: {e}")))?;
    Ok((0..per_member * group.size())
        .map(|_| dist[index.sample(rng)].0)
        .collect())
}
