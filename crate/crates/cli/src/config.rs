//! Run configuration: a `key=value` file overlaid by command-line flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use groupim::baselines::AblationVariant;
use groupim::data::{SynthConfig, DEFAULT_RATIOS, DEFAULT_WINDOW_SECONDS};
use groupim::evaluation::{Characteristic, DEFAULT_KS};
use groupim::TrainConfig;

/// Bad configuration or flags; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(msg: impl Into<String>) -> Result<T, UsageError> {
    Err(UsageError(msg.into()))
}

/// Every recognised key, in echo order.
pub const KEYS: &[&str] = &[
    "data",
    "out",
    "checkpoint",
    "checkins",
    "social",
    "min_count",
    "window_seconds",
    "split_seed",
    "ratios",
    "n_users",
    "n_items",
    "n_groups",
    "n_clusters",
    "noise",
    "embed_dim",
    "lambda",
    "eta",
    "negatives_per_member",
    "aggregator",
    "learning_rate",
    "adam_beta1",
    "adam_beta2",
    "adam_eps",
    "epochs",
    "pretrain_epochs",
    "pretrain_learning_rate",
    "batch_size_groups",
    "batch_size_users",
    "seed",
    "mode",
    "pretrain",
    "ks",
    "bins",
    "mi_variation",
    "partition",
    "baseline",
    "w_rel",
    "w_dis",
    "variants",
    "seeds",
];

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub data: Option<PathBuf>,
    pub out: PathBuf,
    pub checkpoint: Option<PathBuf>,
    pub checkins: Option<PathBuf>,
    pub social: Option<PathBuf>,
    pub min_count: usize,
    pub window_seconds: u64,
    pub split_seed: Option<u64>,
    pub ratios: [f64; 3],
    pub synth: SynthConfig,
    pub ks: Vec<usize>,
    pub bins: Option<Characteristic>,
    pub mi_variation: bool,
    pub partition: String,
    pub baseline: Option<String>,
    pub w_rel: f64,
    pub w_dis: f64,
    pub variants: Vec<AblationVariant>,
    pub seeds: Option<Vec<u64>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            data: None,
            out: PathBuf::from("out"),
            checkpoint: None,
            checkins: None,
            social: None,
            min_count: 1,
            window_seconds: DEFAULT_WINDOW_SECONDS,
            split_seed: None,
            ratios: DEFAULT_RATIOS,
            synth: SynthConfig::default(),
            ks: DEFAULT_KS.to_vec(),
            bins: None,
            mi_variation: false,
            partition: "test".into(),
            baseline: None,
            w_rel: 1.0,
            w_dis: 1.0,
            variants: AblationVariant::ALL.to_vec(),
            seeds: None,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, UsageError> {
    value
        .trim()
        .parse()
        .map_err(|_| UsageError(format!("invalid value `{value}` for `{key}`")))
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, UsageError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn path_str(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl RunConfig {
    /// Parses `key=value` lines; blank lines and `#` comments are ignored.
    pub fn parse_file(text: &str) -> Result<Vec<(String, String)>, UsageError> {
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return usage(format!("config line {}: expected key=value", n + 1));
            };
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(pairs)
    }

    pub fn load(path: &Path) -> Result<Vec<(String, String)>, UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse_file(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), UsageError> {
        let t = &mut self.train;
        let opt_path = |v: &str| (!v.is_empty()).then(|| PathBuf::from(v));
        match key {
            "data" => self.data = opt_path(value),
            "out" => self.out = PathBuf::from(value),
            "checkpoint" => self.checkpoint = opt_path(value),
            "checkins" => self.checkins = opt_path(value),
            "social" => self.social = opt_path(value),
            "min_count" => self.min_count = num(key, value)?,
            "window_seconds" => self.window_seconds = num(key, value)?,
            "split_seed" => self.split_seed = Some(num(key, value)?),
            "ratios" => {
                let r: Vec<f64> = list(key, value)?;
                let [a, b, c] = r[..] else {
                    return usage("ratios needs three comma-separated values");
                };
                self.ratios = [a, b, c];
            }
            "n_users" => self.synth.n_users = num(key, value)?,
            "n_items" => self.synth.n_items = num(key, value)?,
            "n_groups" => self.synth.n_groups = num(key, value)?,
            "n_clusters" => self.synth.n_clusters = num(key, value)?,
            "noise" => self.synth.noise = num(key, value)?,
            "embed_dim" => t.embed_dim = num(key, value)?,
            "lambda" => t.lambda = num(key, value)?,
            "eta" => t.eta = num(key, value)?,
            "negatives_per_member" => t.negatives_per_member = num(key, value)?,
            "aggregator" => {
                t.aggregator = value
                    .parse()
                    .map_err(|_| UsageError(format!("unknown aggregator `{value}` (maxpool, meanpool, attention)")))?
            }
            "learning_rate" => t.learning_rate = num(key, value)?,
            "adam_beta1" => t.adam_betas.0 = num(key, value)?,
            "adam_beta2" => t.adam_betas.1 = num(key, value)?,
            "adam_eps" => t.adam_eps = num(key, value)?,
            "epochs" => t.epochs = num(key, value)?,
            "pretrain_epochs" => t.pretrain_epochs = num(key, value)?,
            "pretrain_learning_rate" => t.pretrain_learning_rate = num(key, value)?,
            "batch_size_groups" => t.batch_size_groups = num(key, value)?,
            "batch_size_users" => t.batch_size_users = num(key, value)?,
            "seed" => t.seed = num(key, value)?,
            "mode" => t.mode = value.parse().map_err(|e: groupim::Error| UsageError(e.to_string()))?,
            "pretrain" => t.pretrain = num(key, value)?,
            "ks" => {
                self.ks = list(key, value)?;
                if self.ks.is_empty() || self.ks.contains(&0) {
                    return usage("ks must list positive cutoffs");
                }
            }
            "bins" => {
                self.bins = match value {
                    "" | "none" => None,
                    v => Some(v.parse().map_err(|e: groupim::Error| UsageError(e.to_string()))?),
                }
            }
            "mi_variation" => self.mi_variation = num(key, value)?,
            "partition" => {
                if value != "test" && value != "val" {
                    return usage("partition must be `test` or `val`");
                }
                self.partition = value.into();
            }
            "baseline" => self.baseline = (!value.is_empty() && value != "none").then(|| value.to_string()),
            "w_rel" => self.w_rel = num(key, value)?,
            "w_dis" => self.w_dis = num(key, value)?,
            "variants" => {
                self.variants =
                    AblationVariant::parse_list(value).map_err(|e| UsageError(e.to_string()))?;
                if self.variants.is_empty() {
                    return usage("variants must not be empty");
                }
            }
            "seeds" => self.seeds = Some(list(key, value)?),
            _ => return usage(format!("unknown config key `{key}`")),
        }
        Ok(())
    }

    pub fn apply(&mut self, pairs: &[(String, String)]) -> Result<(), UsageError> {
        pairs.iter().try_for_each(|(k, v)| self.set(k, v))
    }

    pub fn split_seed(&self) -> u64 {
        self.split_seed.unwrap_or(self.train.seed)
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.seeds.clone().unwrap_or_else(|| vec![self.train.seed])
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            seed: self.train.seed,
            ..self.synth.clone()
        }
    }

    fn values(&self) -> BTreeMap<&'static str, String> {
        let t = &self.train;
        let s = &self.synth;
        let mut m = BTreeMap::new();
        let mut put = |k: &'static str, v: String| {
            m.insert(k, v);
        };
        put("data", path_str(&self.data));
        put("out", self.out.display().to_string());
        put("checkpoint", path_str(&self.checkpoint));
        put("checkins", path_str(&self.checkins));
        put("social", path_str(&self.social));
        put("min_count", self.min_count.to_string());
        put("window_seconds", self.window_seconds.to_string());
        put("split_seed", self.split_seed().to_string());
        put("ratios", join(&self.ratios));
        put("n_users", s.n_users.to_string());
        put("n_items", s.n_items.to_string());
        put("n_groups", s.n_groups.to_string());
        put("n_clusters", s.n_clusters.to_string());
        put("noise", s.noise.to_string());
        put("embed_dim", t.embed_dim.to_string());
        put("lambda", t.lambda.to_string());
        put("eta", t.eta.to_string());
        put("negatives_per_member", t.negatives_per_member.to_string());
        put("aggregator", t.aggregator.to_string());
        put("learning_rate", t.learning_rate.to_string());
        put("adam_beta1", t.adam_betas.0.to_string());
        put("adam_beta2", t.adam_betas.1.to_string());
        put("adam_eps", t.adam_eps.to_string());
        put("epochs", t.epochs.to_string());
        put("pretrain_epochs", t.pretrain_epochs.to_string());
        put("pretrain_learning_rate", t.pretrain_learning_rate.to_string());
        put("batch_size_groups", t.batch_size_groups.to_string());
        put("batch_size_users", t.batch_size_users.to_string());
        put("seed", t.seed.to_string());
        put("mode", t.mode.to_string());
        put("pretrain", t.pretrain.to_string());
        put("ks", join(&self.ks));
        put("bins", self.bins.map(|b| b.to_string()).unwrap_or_else(|| "none".into()));
        put("mi_variation", self.mi_variation.to_string());
        put("partition", self.partition.clone());
        put("baseline", self.baseline.clone().unwrap_or_else(|| "none".into()));
        put("w_rel", self.w_rel.to_string());
        put("w_dis", self.w_dis.to_string());
        put("variants", join(&self.variants));
        put("seeds", join(&self.seeds()));
        m
    }

    /// The effective configuration in the same `key=value` format it is read from.
    pub fn to_kv(&self) -> String {
        let values = self.values();
        let mut out = String::from("# effective configuration\nformat_version=1\n");
        for k in KEYS {
            out.push_str(&format!("{k}={}\n", values[k]));
        }
        out
    }
}
