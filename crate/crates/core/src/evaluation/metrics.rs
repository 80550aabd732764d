use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Item indices ordered by descending score, ties broken by ascending index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedList(pub Vec<usize>);

impl RankedList {
    pub fn from_scores(scores: &[f64]) -> Self {
        let mut idx: Vec<usize> = (0..scores.len()).collect();
        idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        Self(idx)
    }

    pub fn items(&self) -> &[usize] {
        &self.0
    }

    pub fn top(&self, k: usize) -> &[usize] {
        &self.0[..k.min(self.0.len())]
    }
}

fn relevant_set(relevant: &[usize], k: usize) -> Result<BTreeSet<usize>> {
    if relevant.is_empty() {
        return Err(Error::invalid("relevant set is empty"));
    }
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    Ok(relevant.iter().copied().collect())
}

/// |top-k ∩ rel| / min(k, |rel|).
pub fn recall_at_k(ranked: &RankedList, relevant: &[usize], k: usize) -> Result<f64> {
    let rel = relevant_set(relevant, k)?;
    let hits = ranked.top(k).iter().filter(|i| rel.contains(i)).count();
    Ok(hits as f64 / k.min(rel.len()) as f64)
}

fn discount(position: usize) -> f64 {
    1.0 / ((position + 2) as f64).log2()
}

/// Binary-relevance NDCG with the ideal ranking truncated at min(k, |rel|).
pub fn ndcg_at_k(ranked: &RankedList, relevant: &[usize], k: usize) -> Result<f64> {
    let rel = relevant_set(relevant, k)?;
    let dcg: f64 = ranked
        .top(k)
        .iter()
        .enumerate()
        .filter(|(_, i)| rel.contains(i))
        .fold(0.0, |acc, (pos, _)| acc + discount(pos));
    let idcg: f64 = (0..k.min(rel.len())).map(discount).sum();
    Ok(dcg / idcg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranking_ties_break_by_index() {
        assert_eq!(RankedList::from_scores(&[0.1, 0.9, 0.5]).0, vec![1, 2, 0]);
        assert_eq!(RankedList::from_scores(&[0.0; 4]).0, vec![0, 1, 2, 3]);
        assert_eq!(RankedList::from_scores(&[5.0, 9.0, 1.0]).0, vec![1, 0, 2]);
    }

    #[test]
    fn recall_examples() {
        let r = RankedList(vec![0, 1, 2, 3, 4, 5, 6]);
        assert_eq!(recall_at_k(&r, &[1, 3], 5).unwrap(), 1.0);
        assert_eq!(recall_at_k(&r, &[1, 6], 5).unwrap(), 0.5);
        assert_eq!(recall_at_k(&r, &[5, 6], 5).unwrap(), 0.0);
        assert!(recall_at_k(&r, &[], 5).is_err());
    }

    #[test]
    fn ndcg_examples() {
        let r = RankedList(vec![3, 1, 2]);
        assert_eq!(ndcg_at_k(&r, &[3], 3).unwrap(), 1.0);
        let expect = (1.0 / 3f64.log2() + 1.0 / 4f64.log2()) / (1.0 + 1.0 / 3f64.log2());
        assert!((ndcg_at_k(&r, &[1, 2], 3).unwrap() - expect).abs() < 1e-15);
        assert!((expect - 0.6934).abs() < 1e-4);
        assert_eq!(ndcg_at_k(&r, &[2], 1).unwrap(), 0.0);
        assert!(ndcg_at_k(&r, &[1], 0).is_err());
    }
}
