use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &[&str] = &[
    "--set", "n_users=40",
    "--set", "n_items=30",
    "--set", "n_groups=100",
];

const FAST: &[&str] = &[
    "--epochs", "2",
    "--set", "embed_dim=8",
    "--set", "pretrain_epochs=1",
];

fn groupim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_groupim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = groupim(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: &Path) -> String {
    fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

/// Synthesizes and splits a small dataset into `dir`.
fn prepared() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let d = path(dir.path());
    ok(&[&["synth", "--out", d, "--seed", "4"], SMALL].concat());
    ok(&["split", "--data", d, "--out", d]);
    dir
}

fn json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&read(p)).unwrap()
}

#[test]
fn synth_stats_match_files_and_repeat() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let out = ok(&[&["synth", "--out", path(a.path()), "--seed", "9"], SMALL].concat());
    ok(&[&["synth", "--out", path(b.path()), "--seed", "9"], SMALL].concat());
    assert!(out.contains("# Groups\t100"));
    for f in ["interactions.txt", "groups.txt", "dataset.json"] {
        assert_eq!(read(&a.path().join(f)), read(&b.path().join(f)), "{f}");
    }

    let meta = json(&a.path().join("dataset.json"));
    let stats = &meta["stats"];
    let interactions = read(&a.path().join("interactions.txt"));
    let pairs: BTreeSet<&str> = interactions.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(stats["user_item_interactions"], pairs.len());
    let groups = read(&a.path().join("groups.txt"));
    let lines: Vec<Vec<&str>> = groups
        .lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .map(|l| l.split_whitespace().collect())
        .collect();
    let ids: BTreeSet<&str> = lines.iter().map(|f| f[0]).collect();
    assert_eq!(stats["groups"], ids.len());
    assert_eq!(stats["group_item_interactions"], lines.len());
    assert_eq!(meta["num_users"], 40);
    assert_eq!(meta["num_items"], 30);
}

#[test]
fn ingest_builds_groups_from_checkins() {
    let dir = tempfile::tempdir().unwrap();
    let checkins = dir.path().join("checkins.txt");
    let social = dir.path().join("social.txt");
    fs::write(&checkins, "0\t0\t0\n1\t0\t100\n2\t0\t50\n0\t1\t5000\n2\t1\t9000\n1\t1\t9100\n").unwrap();
    fs::write(&social, "0\t1\n").unwrap();
    let out_dir = dir.path().join("data");
    let out = ok(&[
        "ingest",
        "--checkins", path(&checkins),
        "--social", path(&social),
        "--out", path(&out_dir),
    ]);
    assert!(out.contains("grouped check-ins\t2"), "{out}");
    assert!(out.contains("individual check-ins\t4"), "{out}");
    let groups = read(&out_dir.join("groups.txt"));
    let rows: Vec<Vec<&str>> = groups
        .lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .map(|l| l.split_whitespace().collect())
        .collect();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][1], "0,1");
    assert_eq!(rows[0][2], "0");

    let bad = groupim(&[
        "ingest",
        "--checkins", path(&checkins),
        "--social", path(&social),
        "--min-count", "0",
        "--out", path(&out_dir),
    ]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("min_count"));

    let missing = groupim(&["ingest", "--checkins", path(&checkins), "--out", path(&out_dir)]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn train_is_reproducible_and_validates_input() {
    let data = prepared();
    let d = path(data.path());
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for out in [&a, &b] {
        let stdout = ok(&[&["train", "--data", d, "--out", path(out.path()), "--seed", "1"], FAST].concat());
        assert!(stdout.contains("best epoch"));
    }
    assert_eq!(
        fs::read(a.path().join("model.ckpt")).unwrap(),
        fs::read(b.path().join("model.ckpt")).unwrap()
    );
    let log = read(&a.path().join("train_log.jsonl"));
    assert_eq!(log.lines().count(), 2);
    for line in log.lines() {
        let rec: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(rec["val_ndcg20"].is_f64());
    }

    let bad_agg = groupim(&["train", "--data", d, "--out", path(a.path()), "--aggregator", "median"]);
    assert_eq!(bad_agg.status.code(), Some(2));
    let bad_key = groupim(&["train", "--data", d, "--out", path(a.path()), "--set", "no_such_key=1"]);
    assert_eq!(bad_key.status.code(), Some(2));
    let no_split = tempfile::tempdir().unwrap();
    let missing = groupim(&["train", "--data", path(no_split.path()), "--out", path(no_split.path())]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn evaluate_reports_every_cutoff_and_bins() {
    let data = prepared();
    let d = path(data.path());
    let out = tempfile::tempdir().unwrap();
    let o = path(out.path());
    ok(&[&["train", "--data", d, "--out", o], FAST].concat());
    ok(&["evaluate", "--data", d, "--out", o, "--k", "20,50", "--bins", "size"]);

    let report = json(&out.path().join("report.json"));
    for k in ["20", "50"] {
        let m = &report["k"][k];
        assert!((0.0..=1.0).contains(&m["ndcg"].as_f64().unwrap()), "{k}");
        assert!((0.0..=1.0).contains(&m["recall"].as_f64().unwrap()), "{k}");
    }
    let test_groups = read(&data.path().join("test_groups.txt"))
        .lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .map(|l| l.split_whitespace().next().unwrap().to_string())
        .collect::<BTreeSet<_>>()
        .len();
    let csv = read(&out.path().join("groups.csv"));
    assert_eq!(csv.lines().count(), test_groups + 1);

    let bins = report["bins"].as_array().unwrap();
    let total: u64 = bins.iter().map(|b| b["count"].as_u64().unwrap()).sum();
    assert_eq!(total as usize, test_groups);
    let weighted: f64 = bins
        .iter()
        .filter_map(|b| Some(b["count"].as_f64()? * b["ndcg"]["20"].as_f64()?))
        .sum();
    let overall = report["k"]["20"]["ndcg"].as_f64().unwrap();
    assert!((weighted / total as f64 - overall).abs() < 1e-9);

    let pop = tempfile::tempdir().unwrap();
    ok(&["evaluate", "--data", d, "--out", path(pop.path()), "--baseline", "popularity"]);
    assert!(json(&pop.path().join("report.json"))["k"]["50"]["ndcg"].is_f64());
    let bad = groupim(&["evaluate", "--data", d, "--out", path(pop.path()), "--baseline", "median"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn ablate_writes_one_row_per_variant() {
    let data = prepared();
    let out = tempfile::tempdir().unwrap();
    let stdout = ok(&[
        &["ablate", "--data", path(data.path()), "--out", path(out.path())],
        FAST,
        &["--variant", "full,base_LG", "--set", "seeds=0"],
    ]
    .concat());
    assert!(stdout.contains("full - base_LG N@50"));
    let csv = read(&out.path().join("ablation.csv"));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "variant,seed,ndcg@50,recall@50");
    let per_seed: Vec<&str> = lines[1..].iter().filter(|l| !l.contains(",mean,")).copied().collect();
    assert_eq!(per_seed.len(), 2);
    assert!(per_seed[0].starts_with("full,0,"));
    assert!(per_seed[1].starts_with("base_LG,0,"));
}

#[test]
fn gradcheck_flags_injected_fault() {
    let good = groupim(&["gradcheck", "--aggregator", "meanpool"]);
    assert!(good.status.success());
    assert!(String::from_utf8_lossy(&good.stdout).trim_end().ends_with("PASS"));
    let bad = groupim(&["gradcheck", "--aggregator", "meanpool", "--inject-fault"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stdout).trim_end().ends_with("FAIL"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# run settings\nlambda = 2\nepochs=7\nn_users=40\nn_items=30\nn_groups=100\n").unwrap();
    let out = dir.path().join("out");
    ok(&["synth", "--config", path(&cfg), "--lambda", "4", "--out", path(&out)]);
    let echo = read(&out.join("effective_config.txt"));
    assert!(echo.lines().any(|l| l == "lambda=4"), "{echo}");
    assert!(echo.lines().any(|l| l == "epochs=7"), "{echo}");
    assert!(echo.lines().any(|l| l == "n_users=40"), "{echo}");

    fs::write(&cfg, "lambda\n").unwrap();
    assert_eq!(groupim(&["synth", "--config", path(&cfg), "--out", path(&out)]).status.code(), Some(2));
    fs::write(&cfg, "lambda=1000\n").unwrap();
    assert_eq!(groupim(&["synth", "--config", path(&cfg), "--out", path(&out)]).status.code(), Some(2));
}
