use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use groupim::baselines::{
    evaluate_aggregation, evaluate_popularity, run_ablation, AblationVariant, AggregationStrategy, StrategyKind,
};
use groupim::data::{
    construct_groups, filter_dataset, io, split_groups, synthesize_dataset, DatasetSplit, GroupRecord,
    InteractionMatrix,
};
use groupim::evaluation::{evaluate, Characteristic, MetricReport};
use groupim::model::{checkpoint, AggregatorKind};
use groupim::training::{check_objective_terms, initial_state, pretrain_encoder, train, PretrainedEncoder};

mod config;

use config::{RunConfig, UsageError};

const FORMAT_VERSION: u32 = 1;
const DATASET_FILE: &str = "dataset.json";
const INTERACTIONS_FILE: &str = "interactions.txt";
const GROUPS_FILE: &str = "groups.txt";
const PARTITIONS: [&str; 3] = ["train", "val", "test"];

#[derive(Parser)]
#[command(name = "groupim", version, about = "Group recommendation for ephemeral groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a clustered synthetic dataset
    Synth(Common),
    /// Build a dataset from check-ins and a social graph
    Ingest(Common),
    /// Split groups into train/val/test by member set
    Split(Common),
    /// Pre-train the first encoder layer on individual interactions
    Pretrain(Common),
    /// Train a model and keep the best validation checkpoint
    Train(Common),
    /// Evaluate a checkpoint or a baseline on held-out groups
    Evaluate(Common),
    /// Train and compare ablation variants over seeds
    Ablate(Common),
    /// Metrics and MI variation by group size, coherence and diversity
    Analyze(Common),
    /// Finite-difference check of every loss term on a toy problem
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// key=value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, value_parser = parse_aggregator)]
    aggregator: Option<AggregatorKind>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Comma-separated cutoffs
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// size, coherence or diversity
    #[arg(long, value_parser = parse_bins)]
    bins: Option<Characteristic>,
    /// Comma-separated ablation variants
    #[arg(long)]
    variant: Option<String>,
    /// Dataset directory
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    checkins: Option<PathBuf>,
    #[arg(long)]
    social: Option<PathBuf>,
    #[arg(long)]
    min_count: Option<usize>,
    /// popularity, AVG, LM, MAX or RD
    #[arg(long)]
    baseline: Option<String>,
    /// Include MI variation summaries in the report
    #[arg(long)]
    mi_variation: bool,
    /// Any other configuration key
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, value_parser = parse_aggregator)]
    aggregator: Option<AggregatorKind>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scale analytic gradients to exercise the failure path
    #[arg(long, hide = true)]
    inject_fault: bool,
}

fn parse_aggregator(s: &str) -> std::result::Result<AggregatorKind, String> {
    s.parse().map_err(|_| format!("unknown aggregator `{s}` (maxpool, meanpool, attention)"))
}

fn parse_bins(s: &str) -> std::result::Result<Characteristic, String> {
    s.parse().map_err(|e: groupim::Error| e.to_string())
}

impl Common {
    fn resolve(&self) -> std::result::Result<RunConfig, UsageError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply(&RunConfig::load(path)?)?;
        }
        let mut flags: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                flags.push((k.to_string(), v));
            }
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        put("seed", self.seed.map(|v| v.to_string()));
        put("lambda", self.lambda.map(|v| v.to_string()));
        put("eta", self.eta.map(|v| v.to_string()));
        put("aggregator", self.aggregator.map(|v| v.to_string()));
        put("epochs", self.epochs.map(|v| v.to_string()));
        put("ks", self.k.clone());
        put("out", path(&self.out));
        put("bins", self.bins.map(|v| v.to_string()));
        put("variants", self.variant.clone());
        put("data", path(&self.data));
        put("checkpoint", path(&self.checkpoint));
        put("checkins", path(&self.checkins));
        put("social", path(&self.social));
        put("min_count", self.min_count.map(|v| v.to_string()));
        put("baseline", self.baseline.clone());
        put("mi_variation", self.mi_variation.then(|| "true".to_string()));
        for s in &self.set {
            let Some((k, v)) = s.split_once('=') else {
                return Err(UsageError(format!("--set expects KEY=VALUE, got `{s}`")));
            };
            flags.push((k.trim().into(), v.trim().into()));
        }
        cfg.apply(&flags)?;
        cfg.train
            .validate()
            .map_err(|e| UsageError(format!("invalid configuration: {e}")))?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    if let Command::Gradcheck(args) = &command {
        return cmd_gradcheck(args);
    }
    let (Command::Synth(c)
    | Command::Ingest(c)
    | Command::Split(c)
    | Command::Pretrain(c)
    | Command::Train(c)
    | Command::Evaluate(c)
    | Command::Ablate(c)
    | Command::Analyze(c)) = &command
    else {
        unreachable!("gradcheck handled above")
    };
    let cfg = c.resolve()?;
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    write(&cfg.out.join("effective_config.txt"), &cfg.to_kv())?;
    match command {
        Command::Synth(_) => cmd_synth(&cfg),
        Command::Ingest(_) => cmd_ingest(&cfg),
        Command::Split(_) => cmd_split(&cfg),
        Command::Pretrain(_) => cmd_pretrain(&cfg),
        Command::Train(_) => cmd_train(&cfg),
        Command::Evaluate(_) => cmd_evaluate(&cfg),
        Command::Ablate(_) => cmd_ablate(&cfg),
        Command::Analyze(_) => cmd_analyze(&cfg),
        Command::Gradcheck(_) => unreachable!(),
    }?;
    Ok(ExitCode::SUCCESS)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    write(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

struct Dataset {
    users: InteractionMatrix,
    groups: Vec<GroupRecord>,
}

fn data_dir(cfg: &RunConfig) -> &Path {
    cfg.data.as_deref().unwrap_or(&cfg.out)
}

fn dataset_stats(users: &InteractionMatrix, groups: &[GroupRecord]) -> serde_json::Value {
    let n = groups.len().max(1) as f64;
    let group_items: usize = groups.iter().map(|g| g.items.len()).sum();
    let members: usize = groups.iter().map(GroupRecord::size).sum();
    json!({
        "users": users.num_rows(),
        "items": users.num_items(),
        "groups": groups.len(),
        "user_item_interactions": users.nnz(),
        "group_item_interactions": group_items,
        "avg_group_size": members as f64 / n,
        "avg_items_per_group": group_items as f64 / n,
    })
}

fn print_stats(stats: &serde_json::Value) {
    println!("# Users\t{}", stats["users"]);
    println!("# Items\t{}", stats["items"]);
    println!("# Groups\t{}", stats["groups"]);
    println!("# U-I interactions\t{}", stats["user_item_interactions"]);
    println!("# G-I interactions\t{}", stats["group_item_interactions"]);
    println!("Avg. group size\t{:.2}", stats["avg_group_size"].as_f64().unwrap_or(0.0));
    println!("Avg. # items/group\t{:.2}", stats["avg_items_per_group"].as_f64().unwrap_or(0.0));
}

fn save_dataset(out: &Path, users: &InteractionMatrix, groups: &[GroupRecord]) -> Result<()> {
    io::save_interactions(&out.join(INTERACTIONS_FILE), users)?;
    io::save_groups(&out.join(GROUPS_FILE), groups)?;
    let stats = dataset_stats(users, groups);
    write_json(
        &out.join(DATASET_FILE),
        &json!({
            "format_version": FORMAT_VERSION,
            "num_users": users.num_rows(),
            "num_items": users.num_items(),
            "interactions": INTERACTIONS_FILE,
            "groups": GROUPS_FILE,
            "stats": stats,
        }),
    )?;
    print_stats(&stats);
    Ok(())
}

fn read_meta(dir: &Path) -> Result<(usize, usize)> {
    let path = dir.join(DATASET_FILE);
    let text = fs::read_to_string(&path)
        .with_context(|| format!("reading {} (run `synth` or `ingest` first)", path.display()))?;
    let meta: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let field = |k: &str| {
        meta[k]
            .as_u64()
            .map(|v| v as usize)
            .with_context(|| format!("{} lacks `{k}`", path.display()))
    };
    Ok((field("num_users")?, field("num_items")?))
}

fn load_dataset(dir: &Path) -> Result<Dataset> {
    let (nu, ni) = read_meta(dir)?;
    Ok(Dataset {
        users: io::load_interactions(&dir.join(INTERACTIONS_FILE), nu, ni)?,
        groups: io::load_groups(&dir.join(GROUPS_FILE), nu, ni)?,
    })
}

fn partition_file(name: &str) -> String {
    format!("{name}_groups.txt")
}

fn load_split(dir: &Path) -> Result<DatasetSplit> {
    let (nu, ni) = read_meta(dir)?;
    let users = io::load_interactions(&dir.join(INTERACTIONS_FILE), nu, ni)?;
    let mut parts = Vec::new();
    for name in PARTITIONS {
        let path = dir.join(partition_file(name));
        if !path.exists() {
            bail!("{} not found (run `split` first)", path.display());
        }
        parts.push(io::load_groups(&path, nu, ni)?);
    }
    let test = parts.pop().unwrap_or_default();
    let val = parts.pop().unwrap_or_default();
    let train = parts.pop().unwrap_or_default();
    Ok(DatasetSplit { train, val, test, users })
}

fn cmd_synth(cfg: &RunConfig) -> Result<()> {
    let (users, groups) = synthesize_dataset(&cfg.synth_config())?;
    save_dataset(&cfg.out, &users, &groups)
}

fn cmd_ingest(cfg: &RunConfig) -> Result<()> {
    let (Some(checkins), Some(social)) = (&cfg.checkins, &cfg.social) else {
        return Err(UsageError("ingest needs --checkins and --social".into()).into());
    };
    let log = io::load_checkins(checkins)?;
    let graph = io::load_social(social, log.num_users)?;
    let built = construct_groups(&log, &graph, cfg.window_seconds)?;
    let (users, groups) = filter_dataset(&built.users, &built.groups, cfg.min_count)?;
    println!("grouped check-ins\t{}", built.grouped_checkins);
    println!("individual check-ins\t{}", built.individual_checkins);
    save_dataset(&cfg.out, &users, &groups)
}

fn cmd_split(cfg: &RunConfig) -> Result<()> {
    let dir = data_dir(cfg);
    let data = load_dataset(dir)?;
    let split = split_groups(&data.groups, &data.users, cfg.ratios, cfg.split_seed())?;
    if dir != cfg.out {
        fs::copy(dir.join(DATASET_FILE), cfg.out.join(DATASET_FILE))?;
        fs::copy(dir.join(INTERACTIONS_FILE), cfg.out.join(INTERACTIONS_FILE))?;
    }
    let parts = [&split.train, &split.val, &split.test];
    for (name, groups) in PARTITIONS.iter().zip(parts) {
        io::save_groups(&cfg.out.join(partition_file(name)), groups)?;
        println!("{name}\t{} groups", groups.len());
    }
    write_json(
        &cfg.out.join("split.json"),
        &json!({
            "format_version": FORMAT_VERSION,
            "seed": cfg.split_seed(),
            "ratios": cfg.ratios,
            "train": split.train.len(),
            "val": split.val.len(),
            "test": split.test.len(),
        }),
    )
}

fn cmd_pretrain(cfg: &RunConfig) -> Result<()> {
    let users = load_dataset(data_dir(cfg))?.users;
    let before = PretrainedEncoder::initial(users.num_items(), &cfg.train)?.mean_user_loss(&users);
    let encoder = pretrain_encoder(&users, &cfg.train)?;
    let after = encoder.mean_user_loss(&users);
    let model = initial_state(&users, &groupim::TrainConfig {
        pretrain: true,
        ..cfg.train.clone()
    })?;
    checkpoint::save(&cfg.out.join("pretrained.ckpt"), &model)?;
    println!("mean L_U before\t{before:.6}");
    println!("mean L_U after\t{after:.6}");
    write_json(
        &cfg.out.join("pretrain.json"),
        &json!({
            "format_version": FORMAT_VERSION,
            "epochs": cfg.train.pretrain_epochs,
            "mean_user_loss_before": before,
            "mean_user_loss_after": after,
        }),
    )
}

fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let split = load_split(data_dir(cfg))?;
    let (model, log) = train(&split, &cfg.train)?;
    checkpoint::save(&cfg.out.join("model.ckpt"), &model)?;
    write(&cfg.out.join("train_log.jsonl"), &log.to_jsonl())?;
    for e in &log.epochs {
        let val = e.val_ndcg20.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
        println!("epoch {:>3}  total {:.5}  val N@20 {val}", e.epoch, e.total);
    }
    match log.best_epoch {
        Some(b) => println!("best epoch {b}"),
        None => println!("no epochs run; saved the initial state"),
    }
    Ok(())
}

fn eval_groups<'a>(cfg: &RunConfig, split: &'a DatasetSplit) -> &'a [GroupRecord] {
    if cfg.partition == "val" {
        &split.val
    } else {
        &split.test
    }
}

fn checkpoint_path(cfg: &RunConfig) -> PathBuf {
    cfg.checkpoint.clone().unwrap_or_else(|| cfg.out.join("model.ckpt"))
}

fn build_report(cfg: &RunConfig, split: &DatasetSplit) -> Result<MetricReport> {
    let groups = eval_groups(cfg, split);
    let report = match cfg.baseline.as_deref() {
        None => {
            let model = checkpoint::load(&checkpoint_path(cfg))?;
            if model.num_items() != split.users.num_items() {
                bail!("checkpoint has {} items, dataset has {}", model.num_items(), split.users.num_items());
            }
            evaluate(&model, groups, &split.users, &cfg.ks)?
        }
        Some(b) if b.eq_ignore_ascii_case("popularity") => evaluate_popularity(split, groups, &cfg.ks)?,
        Some(b) => {
            let kind: StrategyKind = b
                .parse()
                .map_err(|_| UsageError(format!("unknown baseline `{b}` (popularity, AVG, LM, MAX, RD)")))?;
            let strategy = match kind {
                StrategyKind::Rd => AggregationStrategy::rd(cfg.w_rel, cfg.w_dis).map_err(|e| UsageError(e.to_string()))?,
                k => AggregationStrategy::new(k),
            };
            let encoder = pretrain_encoder(&split.users, &cfg.train)?;
            evaluate_aggregation(&encoder, groups, &split.users, &cfg.ks, strategy)?
        }
    };
    Ok(report)
}

fn print_report(report: &MetricReport) {
    for (k, m) in &report.k {
        println!("N@{k} {:.4}\tR@{k} {:.4}", m.ndcg, m.recall);
    }
}

fn cmd_evaluate(cfg: &RunConfig) -> Result<()> {
    let split = load_split(data_dir(cfg))?;
    let mut report = build_report(cfg, &split)?;
    if let Some(c) = cfg.bins.or(cfg.mi_variation.then_some(Characteristic::Coherence)) {
        report = report.with_bins(c);
        if !cfg.mi_variation {
            report.mi_variation.clear();
        }
    }
    write(&cfg.out.join("report.json"), &(report.to_json()? + "\n"))?;
    write(&cfg.out.join("groups.csv"), &report.groups_csv())?;
    print_report(&report);
    for b in &report.bins {
        let k = report.ks[0];
        let n = b.ndcg[&k].map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
        println!("{}\t{}\tN@{k} {n}", b.label, b.count);
    }
    Ok(())
}

fn cmd_analyze(cfg: &RunConfig) -> Result<()> {
    let split = load_split(data_dir(cfg))?;
    let report = build_report(cfg, &split)?;
    let chars = [Characteristic::Size, Characteristic::Coherence, Characteristic::Diversity];
    let mut sections = serde_json::Map::new();
    for c in chars {
        let binned = report.clone().with_bins(c);
        println!("[{c}]");
        for (b, mi) in binned.bins.iter().zip(&binned.mi_variation) {
            let k = binned.ks[0];
            let show = |v: Option<f64>| v.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
            println!(
                "{}\tgroups {}\tN@{k} {}\tMI var median {} iqr {}",
                b.label,
                b.count,
                show(b.ndcg[&k]),
                show(mi.median),
                show(mi.iqr)
            );
        }
        sections.insert(
            c.to_string(),
            json!({ "bins": binned.bins, "mi_variation": binned.mi_variation }),
        );
    }
    write_json(
        &cfg.out.join("analysis.json"),
        &json!({
            "format_version": FORMAT_VERSION,
            "k": report.k,
            "characteristics": sections,
        }),
    )?;
    write(&cfg.out.join("groups.csv"), &report.groups_csv())
}

fn cmd_ablate(cfg: &RunConfig) -> Result<()> {
    let split = load_split(data_dir(cfg))?;
    let ks = if cfg.ks == groupim::evaluation::DEFAULT_KS { vec![50] } else { cfg.ks.clone() };
    let table = run_ablation(&split, &cfg.train, &cfg.variants, &cfg.seeds(), &ks)?;
    write(&cfg.out.join("ablation.csv"), &table.to_csv())?;
    write(&cfg.out.join("ablation.json"), &(table.to_json()? + "\n"))?;
    print!("{}", table.to_csv());
    let k = ks[0];
    if let Some(d) = table.ndcg_delta(AblationVariant::Full, AblationVariant::BaseLg, k) {
        println!("full - base_LG N@{k}: {d:+.4}");
    }
    Ok(())
}

fn cmd_gradcheck(args: &GradcheckArgs) -> Result<ExitCode> {
    let kinds = match args.aggregator {
        Some(k) => vec![k],
        None => vec![AggregatorKind::MaxPool, AggregatorKind::MeanPool, AggregatorKind::Attention],
    };
    let fault = args.inject_fault.then_some(2.0);
    let mut ok = true;
    for kind in kinds {
        for check in check_objective_terms(kind, args.seed, fault)? {
            for t in &check.report.tensors {
                let verdict = if t.passed { "ok" } else { "FAIL" };
                println!("{kind}\t{}\t{}\t{:.3e}\t{verdict}", check.term, t.name, t.max_rel_error);
            }
            ok &= check.report.passed();
        }
    }
    println!("{}", if ok { "PASS" } else { "FAIL" });
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
