//! Recommendation for ephemeral groups.
//!
//! A neural group recommender (preference encoder, permutation-invariant
//! aggregator, multinomial item head) regularized by a bilinear user-group
//! discriminator trained to separate members from preference-biased
//! negatives, whose scores also weight each member's personal history when
//! training the group embedding.

pub mod baselines;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod objectives;
pub mod rng;
pub mod training;

pub use data::{DatasetSplit, GroupRecord, InteractionMatrix};
pub use error::{Error, Result};
pub use evaluation::MetricReport;
pub use model::{AggregatorKind, ModelState};
pub use objectives::LossMode;
pub use training::{TrainConfig, TrainLog};
