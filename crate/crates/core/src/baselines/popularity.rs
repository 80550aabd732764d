use crate::data::{group_matrix, DatasetSplit, GroupRecord, InteractionMatrix};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_rankings, MetricReport, RankedList};

/// Items by descending interaction count in `train`, ties by index.
pub fn popularity_ranking(train: &InteractionMatrix) -> Result<RankedList> {
    if train.nnz() == 0 {
        return Err(Error::invalid("popularity needs at least one training interaction"));
    }
    let counts: Vec<f64> = train.item_counts().into_iter().map(|c| c as f64).collect();
    Ok(RankedList::from_scores(&counts))
}

/// Every interaction visible at training time: individual histories plus
/// the training groups' items.
pub fn training_interactions(split: &DatasetSplit) -> Result<InteractionMatrix> {
    let groups = group_matrix(&split.train, split.users.num_items())?;
    let rows = split.users.rows().chain(groups.rows()).map(<[usize]>::to_vec).collect();
    InteractionMatrix::from_rows(split.users.num_items(), rows)
}

/// Popularity baseline evaluated on `groups`, with counts from the split's
/// training interactions only.
pub fn evaluate_popularity(split: &DatasetSplit, groups: &[GroupRecord], ks: &[usize]) -> Result<MetricReport> {
    let ranked = popularity_ranking(&training_interactions(split)?)?;
    evaluate_rankings(groups, &split.users, ks, |_| Ok((ranked.clone(), None)))
}
