use super::{GroupRecord, InteractionMatrix};
use crate::error::{Error, Result};

/// Old-to-new index maps produced by [`filter_min_interactions`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexRemap {
    pub users: Vec<Option<usize>>,
    pub items: Vec<Option<usize>>,
}

impl IndexRemap {
    /// Remaps groups onto the filtered index space, dropping removed members
    /// and items. Groups left with fewer than two members or no items vanish.
    pub fn apply_to_groups(&self, groups: &[GroupRecord]) -> Vec<GroupRecord> {
        groups
            .iter()
            .filter_map(|g| {
                let members: Vec<usize> = g
                    .members
                    .iter()
                    .filter_map(|&u| self.users.get(u).copied().flatten())
                    .collect();
                let items: Vec<usize> = g
                    .items
                    .iter()
                    .filter_map(|&i| self.items.get(i).copied().flatten())
                    .collect();
                (members.len() >= 2 && !items.is_empty())
                    .then(|| GroupRecord::new(g.group_id, members, items))
            })
            .collect()
    }

    /// Remaps a matrix over the original index space, keeping surviving rows.
    pub fn apply_to_matrix(&self, m: &InteractionMatrix) -> Result<InteractionMatrix> {
        let num_items = self.items.iter().flatten().count();
        let rows = m
            .rows()
            .enumerate()
            .filter(|(u, _)| self.users.get(*u).copied().flatten().is_some())
            .map(|(_, row)| row.iter().filter_map(|&i| self.items.get(i).copied().flatten()).collect())
            .collect();
        InteractionMatrix::from_rows(num_items, rows)
    }
}

/// Applies the threshold to each user's combined individual and group
/// activity, then remaps both the individual matrix and the groups.
pub fn filter_dataset(
    users: &InteractionMatrix,
    groups: &[GroupRecord],
    min_count: usize,
) -> Result<(InteractionMatrix, Vec<GroupRecord>)> {
    let mut combined: Vec<Vec<usize>> = users.rows().map(<[usize]>::to_vec).collect();
    for g in groups {
        for &u in &g.members {
            let row = combined
                .get_mut(u)
                .ok_or(Error::OutOfRange { what: "user", index: u, limit: users.num_rows() })?;
            row.extend_from_slice(&g.items);
        }
    }
    for row in &mut combined {
        row.sort_unstable();
        row.dedup();
    }
    let combined = InteractionMatrix::from_rows(users.num_items(), combined)?;
    let (_, remap) = filter_min_interactions(&combined, min_count)?;
    Ok((remap.apply_to_matrix(users)?, remap.apply_to_groups(groups)))
}

/// Iteratively drops users and items with fewer than `min_count`
/// interactions until every survivor satisfies the threshold.
pub fn filter_min_interactions(
    matrix: &InteractionMatrix,
    min_count: usize,
) -> Result<(InteractionMatrix, IndexRemap)> {
    if min_count == 0 {
        return Err(Error::invalid("min_count must be at least 1"));
    }
    let mut user_alive = vec![true; matrix.num_rows()];
    let mut item_alive = vec![true; matrix.num_items()];

    loop {
        let mut item_counts = vec![0usize; matrix.num_items()];
        let mut changed = false;
        for (u, row) in matrix.rows().enumerate() {
            if !user_alive[u] {
                continue;
            }
            let n = row.iter().filter(|&&i| item_alive[i]).count();
            if n < min_count {
                user_alive[u] = false;
                changed = true;
                continue;
            }
            for &i in row {
                item_counts[i] += 1;
            }
        }
        for (i, alive) in item_alive.iter_mut().enumerate() {
            if *alive && item_counts[i] < min_count {
                *alive = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let compact = |alive: &[bool]| -> Vec<Option<usize>> {
        let mut next = 0;
        alive
            .iter()
            .map(|&a| {
                a.then(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect()
    };
    let remap = IndexRemap {
        users: compact(&user_alive),
        items: compact(&item_alive),
    };
    let num_users = remap.users.iter().flatten().count();
    let num_items = remap.items.iter().flatten().count();
    if num_users == 0 || num_items == 0 {
        return Err(Error::EmptyAfterFiltering(min_count));
    }

    let rows = matrix
        .rows()
        .enumerate()
        .filter(|(u, _)| user_alive[*u])
        .map(|(_, row)| row.iter().filter_map(|&i| remap.items[i]).collect())
        .collect();
    Ok((InteractionMatrix::from_rows(num_items, rows)?, remap))
}
