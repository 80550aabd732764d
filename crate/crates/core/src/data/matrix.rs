use crate::error::{Error, Result};

/// Sparse binary interaction matrix stored as sorted per-row item lists.
///
/// Rows are users (or groups), columns are items.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionMatrix {
    num_items: usize,
    rows: Vec<Vec<usize>>,
}

impl InteractionMatrix {
    pub fn empty(num_rows: usize, num_items: usize) -> Self {
        Self {
            num_items,
            rows: vec![Vec::new(); num_rows],
        }
    }

    /// Builds a matrix from arbitrary (row, item) pairs, sorting and deduplicating.
    pub fn from_pairs(
        num_rows: usize,
        num_items: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut rows = vec![Vec::new(); num_rows];
        for (r, i) in pairs {
            if r >= num_rows {
                return Err(Error::OutOfRange {
                    what: "row",
                    index: r,
                    limit: num_rows,
                });
            }
            if i >= num_items {
                return Err(Error::OutOfRange {
                    what: "item",
                    index: i,
                    limit: num_items,
                });
            }
            rows[r].push(i);
        }
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
        }
        Ok(Self { num_items, rows })
    }

    /// Builds from rows that must already be strictly increasing and in range.
    pub fn from_rows(num_items: usize, rows: Vec<Vec<usize>>) -> Result<Self> {
        for (r, row) in rows.iter().enumerate() {
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid(format!("row {r} is not strictly increasing")));
            }
            if let Some(&last) = row.last() {
                if last >= num_items {
                    return Err(Error::OutOfRange {
                        what: "item",
                        index: last,
                        limit: num_items,
                    });
                }
            }
        }
        Ok(Self { num_items, rows })
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn row(&self, r: usize) -> &[usize] {
        &self.rows[r]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[usize]> {
        self.rows.iter().map(Vec::as_slice)
    }

    /// |x_u| for row `r`.
    pub fn row_len(&self, r: usize) -> usize {
        self.rows[r].len()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn contains(&self, r: usize, item: usize) -> bool {
        self.rows[r].binary_search(&item).is_ok()
    }

    /// Per-item interaction counts (column sums).
    pub fn item_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_items];
        for row in &self.rows {
            for &i in row {
                counts[i] += 1;
            }
        }
        counts
    }

    /// Whether row `r` shares at least one item with the sorted list `items`.
    pub fn overlaps(&self, r: usize, items: &[usize]) -> bool {
        sorted_intersection_len(&self.rows[r], items) > 0
    }

    pub fn dense_row(&self, r: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.num_items];
        for &i in &self.rows[r] {
            v[i] = 1.0;
        }
        v
    }
}

pub(crate) fn sorted_intersection_len(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_are_sorted_and_deduplicated() {
        let m = InteractionMatrix::from_pairs(1, 3, [(0, 2), (0, 1), (0, 1)]).unwrap();
        assert_eq!(m.row(0), &[1, 2]);
        assert_eq!(m.row_len(0), 2);
    }

    #[test]
    fn out_of_range_item_rejected() {
        let err = InteractionMatrix::from_pairs(1, 3, [(0, 5)]).unwrap_err();
        assert!(matches!(err, Error::OutOfRange { what: "item", .. }));
    }

    #[test]
    fn unsorted_rows_rejected() {
        assert!(InteractionMatrix::from_rows(4, vec![vec![2, 1]]).is_err());
        assert!(InteractionMatrix::from_rows(4, vec![vec![1, 1]]).is_err());
        assert!(InteractionMatrix::from_rows(4, vec![vec![1, 4]]).is_err());
    }

    #[test]
    fn counts_and_overlap() {
        let m = InteractionMatrix::from_rows(3, vec![vec![0, 1], vec![1, 2]]).unwrap();
        assert_eq!(m.item_counts(), vec![1, 2, 1]);
        assert!(m.overlaps(0, &[1]));
        assert!(!m.overlaps(0, &[2]));
        assert_eq!(m.nnz(), 4);
    }
}
