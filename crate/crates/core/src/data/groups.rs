use serde::{Deserialize, Serialize};

use super::InteractionMatrix;
use crate::error::{Error, Result};

/// One ephemeral group: a member set and the items it interacted with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupRecord {
    pub group_id: u64,
    /// Sorted, duplicate-free member user indices.
    pub members: Vec<usize>,
    /// Sorted, duplicate-free item indices (x_g).
    pub items: Vec<usize>,
}

impl GroupRecord {
    pub fn new(group_id: u64, mut members: Vec<usize>, mut items: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        items.sort_unstable();
        items.dedup();
        Self {
            group_id,
            members,
            items,
        }
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn is_member(&self, user: usize) -> bool {
        self.members.binary_search(&user).is_ok()
    }

    /// Checks the record against a user matrix: at least two members, all in
    /// range, non-empty items within the item universe.
    pub fn validate(&self, users: &InteractionMatrix) -> Result<()> {
        if self.members.len() < 2 {
            return Err(Error::invalid(format!(
                "group {} has fewer than 2 members",
                self.group_id
            )));
        }
        if self.items.is_empty() {
            return Err(Error::invalid(format!("group {} has no items", self.group_id)));
        }
        if let Some(&u) = self.members.iter().find(|&&u| u >= users.num_rows()) {
            return Err(Error::OutOfRange {
                what: "user",
                index: u,
                limit: users.num_rows(),
            });
        }
        if let Some(&i) = self.items.iter().find(|&&i| i >= users.num_items()) {
            return Err(Error::OutOfRange {
                what: "item",
                index: i,
                limit: users.num_items(),
            });
        }
        Ok(())
    }
}

/// Group-item matrix X_G with one row per group, in list order.
pub fn group_matrix(groups: &[GroupRecord], num_items: usize) -> Result<InteractionMatrix> {
    InteractionMatrix::from_rows(num_items, groups.iter().map(|g| g.items.clone()).collect())
}
