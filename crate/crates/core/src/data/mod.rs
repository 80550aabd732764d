//! Interaction storage, ingestion, group construction, splitting and
//! synthetic data.

mod checkins;
mod filter;
mod groups;
pub mod io;
mod matrix;
mod split;
mod synth;

pub use checkins::{
    construct_groups, Checkin, CheckinLog, GroupConstruction, SocialGraph, DEFAULT_WINDOW_SECONDS,
};
pub use filter::{filter_dataset, filter_min_interactions, IndexRemap};
pub use groups::{group_matrix, GroupRecord};
pub use io::load_interactions;
pub use matrix::InteractionMatrix;
pub(crate) use matrix::sorted_intersection_len;
pub use split::{largest_remainder, split_groups, DatasetSplit, DEFAULT_RATIOS};
pub use synth::{item_cluster, synthesize_dataset, user_cluster, SynthConfig};
