//! Fixtures shared by the benchmarks.

use groupim::data::{split_groups, synthesize_dataset, SynthConfig, DEFAULT_RATIOS};
use groupim::model::{init_params, ModelDims};
use groupim::objectives::sample_negatives;
use groupim::rng::{stream_rng, Stream};
use groupim::{AggregatorKind, DatasetSplit, GroupRecord, ModelState, TrainConfig};

pub struct Fixture {
    pub split: DatasetSplit,
    pub model: ModelState,
    pub cfg: TrainConfig,
    /// Negatives for the first `batch` training groups.
    pub negatives: Vec<Vec<usize>>,
    pub batch: usize,
}

impl Fixture {
    pub fn batch_groups(&self) -> Vec<&GroupRecord> {
        self.split.train.iter().take(self.batch).collect()
    }
}

/// Synthetic data at the given scale with a freshly initialized model.
pub fn fixture(n_users: usize, n_items: usize, embed_dim: usize, aggregator: AggregatorKind) -> Fixture {
    let synth = SynthConfig {
        n_users,
        n_items,
        n_groups: n_users * 2,
        ..SynthConfig::default()
    };
    let (users, groups) = synthesize_dataset(&synth).expect("synthetic data");
    let split = split_groups(&groups, &users, DEFAULT_RATIOS, 0).expect("split");
    let cfg = TrainConfig {
        embed_dim,
        aggregator,
        ..TrainConfig::default()
    };
    let dims = ModelDims {
        num_items: n_items,
        embed_dim,
        aggregator,
    };
    let model = init_params(dims, cfg.hyper(), 0).expect("init");
    let batch = cfg.batch_size_groups.min(split.train.len());
    let negatives = split.train[..batch]
        .iter()
        .map(|g| {
            let mut rng = stream_rng(0, Stream::Negatives, &[0, g.group_id]);
            sample_negatives(g, &split.users, cfg.eta, cfg.negatives_per_member, &mut rng).expect("negatives")
        })
        .collect();
    Fixture {
        split,
        model,
        cfg,
        negatives,
        batch,
    }
}
