//! Loss terms, negative sampling and gradients.

mod losses;
mod objective;
mod sampler;

pub use losses::{
    group_loss, mi_loss, mi_loss_from_logits, multinomial_nll, user_loss, weighted_user_group_loss, PairScores,
};
pub use objective::{
    combined_loss, cosine_weight, evaluate_objective, Batch, ContextWeighting, LossMode, LossReport, Terms,
};
pub use sampler::{negative_distribution, sample_negatives};

use crate::model::math::softplus;

/// BCE of a raw score: −log σ(s) for positives, −log(1 − σ(s)) for negatives.
pub(crate) fn softplus_bce(score: f64, positive: bool) -> f64 {
    if positive {
        softplus(-score)
    } else {
        softplus(score)
    }
}
