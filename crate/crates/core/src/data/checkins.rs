//! Ephemeral group construction from location check-ins.

use std::collections::BTreeMap;

use super::{GroupRecord, InteractionMatrix};
use crate::error::{Error, Result};

/// Default co-check-in window: 15 minutes.
pub const DEFAULT_WINDOW_SECONDS: u64 = 900;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Checkin {
    pub user: usize,
    pub poi: usize,
    pub timestamp: u64,
}

#[derive(Debug, Clone, Default)]
pub struct CheckinLog {
    pub num_users: usize,
    pub num_pois: usize,
    pub records: Vec<Checkin>,
}

impl CheckinLog {
    pub fn new(num_users: usize, num_pois: usize, records: Vec<Checkin>) -> Result<Self> {
        for c in &records {
            if c.user >= num_users {
                return Err(Error::OutOfRange {
                    what: "user",
                    index: c.user,
                    limit: num_users,
                });
            }
            if c.poi >= num_pois {
                return Err(Error::OutOfRange {
                    what: "poi",
                    index: c.poi,
                    limit: num_pois,
                });
            }
        }
        Ok(Self {
            num_users,
            num_pois,
            records,
        })
    }
}

/// Undirected friendship graph without self-loops.
#[derive(Debug, Clone)]
pub struct SocialGraph {
    adjacency: Vec<Vec<usize>>,
}

impl SocialGraph {
    pub fn from_edges(num_users: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); num_users];
        for (a, b) in edges {
            for u in [a, b] {
                if u >= num_users {
                    return Err(Error::OutOfRange {
                        what: "user",
                        index: u,
                        limit: num_users,
                    });
                }
            }
            if a == b {
                continue;
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
            adj.dedup();
        }
        Ok(Self { adjacency })
    }

    pub fn num_users(&self) -> usize {
        self.adjacency.len()
    }

    pub fn are_friends(&self, a: usize, b: usize) -> bool {
        self.adjacency
            .get(a)
            .is_some_and(|adj| adj.binary_search(&b).is_ok())
    }

    pub fn friends(&self, u: usize) -> &[usize] {
        &self.adjacency[u]
    }
}

/// Result of splitting a check-in log into group and individual interactions.
#[derive(Debug, Clone)]
pub struct GroupConstruction {
    /// X_U built from the check-ins not absorbed into any group.
    pub users: InteractionMatrix,
    pub groups: Vec<GroupRecord>,
    pub grouped_checkins: usize,
    pub individual_checkins: usize,
}

/// Scans each POI's check-ins in time order. The earliest unconsumed check-in
/// anchors a window; the anchor's friends checking in at the same POI within
/// `window_seconds` join it. Windows with two or more distinct users become a
/// group interaction, everything left over becomes an individual interaction.
///
/// A friend contributes at most one check-in (their earliest in the window)
/// to a given group; any later ones stay available for subsequent windows.
/// Groups with the same member set are merged and accumulate POIs.
pub fn construct_groups(
    log: &CheckinLog,
    graph: &SocialGraph,
    window_seconds: u64,
) -> Result<GroupConstruction> {
    if window_seconds == 0 {
        return Err(Error::invalid("window_seconds must be positive"));
    }
    if graph.num_users() < log.num_users {
        return Err(Error::invalid(format!(
            "social graph covers {} users, log has {}",
            graph.num_users(),
            log.num_users
        )));
    }

    let mut by_poi: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (idx, c) in log.records.iter().enumerate() {
        by_poi.entry(c.poi).or_default().push(idx);
    }

    let mut consumed = vec![false; log.records.len()];
    // member set -> (first-seen order, items)
    let mut merged: BTreeMap<Vec<usize>, (usize, Vec<usize>)> = BTreeMap::new();
    let mut grouped_checkins = 0;

    for (&poi, idxs) in &mut by_poi {
        idxs.sort_by_key(|&i| (log.records[i].timestamp, log.records[i].user, i));
        for a in 0..idxs.len() {
            let anchor_idx = idxs[a];
            if consumed[anchor_idx] {
                continue;
            }
            let anchor = log.records[anchor_idx];
            let mut members = vec![anchor.user];
            let mut taken = vec![anchor_idx];
            for &j in &idxs[a + 1..] {
                let c = log.records[j];
                if c.timestamp - anchor.timestamp > window_seconds {
                    break;
                }
                if consumed[j] || !graph.are_friends(anchor.user, c.user) || members.contains(&c.user) {
                    continue;
                }
                members.push(c.user);
                taken.push(j);
            }
            if members.len() < 2 {
                continue;
            }
            for &t in &taken {
                consumed[t] = true;
            }
            grouped_checkins += taken.len();
            members.sort_unstable();
            let next = merged.len();
            let entry = merged.entry(members).or_insert_with(|| (next, Vec::new()));
            entry.1.push(poi);
        }
    }

    let individual: Vec<(usize, usize)> = log
        .records
        .iter()
        .zip(&consumed)
        .filter(|(_, &c)| !c)
        .map(|(r, _)| (r.user, r.poi))
        .collect();
    let individual_checkins = individual.len();
    let users = InteractionMatrix::from_pairs(log.num_users, log.num_pois, individual)?;

    let mut ordered: Vec<(usize, Vec<usize>, Vec<usize>)> = merged
        .into_iter()
        .map(|(members, (order, items))| (order, members, items))
        .collect();
    ordered.sort_by_key(|(order, _, _)| *order);
    let groups = ordered
        .into_iter()
        .enumerate()
        .map(|(gid, (_, members, items))| GroupRecord::new(gid as u64, members, items))
        .collect();

    Ok(GroupConstruction {
        users,
        groups,
        grouped_checkins,
        individual_checkins,
    })
}
