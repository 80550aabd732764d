//! Popularity and score-aggregation baselines, and the ablation harness.

mod ablation;
mod aggregation;
mod popularity;

pub use ablation::{run_ablation, AblationMean, AblationRow, AblationTable, AblationVariant};
pub use aggregation::{
    evaluate_aggregation, rank_by_aggregation, score_aggregate, user_scores_from_encoder, AggregationStrategy,
    StrategyKind,
};
pub use popularity::{evaluate_popularity, popularity_ranking, training_interactions};
