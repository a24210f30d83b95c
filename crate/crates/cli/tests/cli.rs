//! End-to-end tests of the callcast binary: determinism, exit codes, report
//! shapes, and the staged pretrain/train/evaluate/simulate workflow.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_callcast")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("callcast-cli-{tag}-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

/// Small-model overrides keeping the workflow fast.
fn small_sets(extra: &[&str]) -> Vec<String> {
    let mut args: Vec<String> = [
        "d_t=8",
        "d_s=8",
        "max_sentences=6",
        "max_sentence_len=16",
        "ffn_mult=1",
        "probe_hidden=4",
        "pretrain_epochs=1",
        "k_preferences=2",
        "epochs=1",
        "batch=4",
        "search_iters=20",
    ]
    .iter()
    .flat_map(|s| ["--set".to_string(), s.to_string()])
    .collect();
    for s in extra {
        args.push("--set".to_string());
        args.push(s.to_string());
    }
    args
}

fn gen(dir: &Path, seed: u64, calls: usize) -> PathBuf {
    let corpus = dir.join(format!("corpus-{seed}.jsonl"));
    let out = run(&[
        "gen-data",
        "--seed",
        &seed.to_string(),
        "--calls",
        &calls.to_string(),
        "--out",
        corpus.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    corpus
}

#[test]
fn gen_data_is_seed_deterministic() {
    let dir = tmp_dir("gen");
    let a = gen(&dir, 11, 12);
    let b_path = dir.join("again.jsonl");
    let out = run(&[
        "gen-data",
        "--seed",
        "11",
        "--calls",
        "12",
        "--out",
        b_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b_path).unwrap());
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn gen_data_zero_calls_writes_valid_header() {
    let dir = tmp_dir("gen0");
    let corpus = gen(&dir, 5, 0);
    let body = fs::read_to_string(&corpus).unwrap();
    assert_eq!(body.lines().count(), 1);
    assert!(body.contains("callcast-corpus"));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn gen_data_summary_counts_match_stdout_contract() {
    let dir = tmp_dir("gensum");
    let corpus = dir.join("c.jsonl");
    let out = run(&[
        "gen-data",
        "--seed",
        "3",
        "--calls",
        "8",
        "--out",
        corpus.to_str().unwrap(),
    ]);
    let text = stdout(&out);
    for key in [
        "calls=8",
        "sentences=",
        "numerals=",
        "numerals_monetary=",
        "numerals_temporal=",
        "numerals_percentage=",
        "numerals_other=",
    ] {
        assert!(text.contains(key), "missing {key} in {text}");
    }
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn bogus_task_is_usage_error() {
    let dir = tmp_dir("bogus");
    let corpus = gen(&dir, 2, 10);
    let out = run(&[
        "pretrain",
        "--task",
        "bogus",
        "--corpus",
        corpus.to_str().unwrap(),
        "--out",
        dir.join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn mc_without_checkpoint_is_explicit_validation_error() {
    let dir = tmp_dir("mcerr");
    let corpus = gen(&dir, 2, 12);
    let out_dir = dir.join("stage");
    let mut args = vec![
        "pretrain".to_string(),
        "--task".to_string(),
        "mc".to_string(),
        "--corpus".to_string(),
        corpus.to_str().unwrap().to_string(),
        "--out".to_string(),
        out_dir.to_str().unwrap().to_string(),
    ];
    args.extend(small_sets(&[]));
    let out = Command::new(bin()).args(&args).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("checkpoint"));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn invalid_config_value_exits_3_and_missing_file_exits_5() {
    let dir = tmp_dir("codes");
    let corpus = gen(&dir, 2, 12);
    let out = run(&[
        "train",
        "--corpus",
        corpus.to_str().unwrap(),
        "--out",
        dir.join("t").to_str().unwrap(),
        "--no-pretrain",
        "--set",
        "k_preferences=1",
    ]);
    assert_eq!(out.status.code(), Some(3));

    let out = run(&[
        "evaluate",
        "--model",
        dir.join("nope.ckpt").to_str().unwrap(),
        "--corpus",
        corpus.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(5));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn staged_workflow_reports_and_simulates() {
    let dir = tmp_dir("flow");
    let corpus = gen(&dir, 13, 24);
    let out_dir = dir.join("run");
    let corpus_s = corpus.to_str().unwrap().to_string();
    let out_s = out_dir.to_str().unwrap().to_string();

    // NCC stage.
    let mut args = vec![
        "pretrain".into(),
        "--task".into(),
        "ncc".into(),
        "--corpus".into(),
        corpus_s.clone(),
        "--out".into(),
        out_s.clone(),
    ];
    args.extend(small_sets(&[]));
    let out = Command::new(bin()).args(&args).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("lrap="));
    assert!(out_dir.join("ncc.ckpt").exists());

    // MC stage (defaults to <out>/ncc.ckpt).
    let mut args = vec![
        "pretrain".into(),
        "--task".into(),
        "mc".into(),
        "--corpus".into(),
        corpus_s.clone(),
        "--out".into(),
        out_s.clone(),
    ];
    args.extend(small_sets(&[]));
    let out = Command::new(bin()).args(&args).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    for col in [
        "accuracy_monetary=",
        "accuracy_temporal=",
        "accuracy_percentage=",
        "accuracy_all=",
    ] {
        assert!(text.contains(col), "missing {col}");
    }
    assert!(out_dir.join("mc.ckpt").exists());

    // Train from the staged checkpoint.
    let mut args = vec![
        "train".into(),
        "--corpus".into(),
        corpus_s.clone(),
        "--out".into(),
        out_s.clone(),
    ];
    args.extend(small_sets(&[]));
    let out = Command::new(bin()).args(&args).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("model.ckpt").exists());
    assert!(out_dir.join("manifest.txt").exists());

    // Trajectory rows carry the contract fields.
    let traj = fs::read_to_string(out_dir.join("trajectory_k0.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(traj.lines().next().unwrap()).unwrap();
    for field in ["step", "l1", "l2", "alpha1", "alpha2", "k"] {
        assert!(first.get(field).is_some(), "trajectory missing {field}");
    }

    // Evaluate: exactly the four horizons.
    let out = run(&[
        "evaluate",
        "--model",
        out_dir.join("model.ckpt").to_str().unwrap(),
        "--corpus",
        &corpus_s,
        "--split",
        "test",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    for n in [3, 7, 15, 30] {
        assert!(text.contains(&format!("mcc_{n}=")));
        assert!(text.contains(&format!("f1_{n}=")));
        assert!(text.contains(&format!("vol_mse_{n}=")));
    }
    assert!(!text.contains("mcc_5="));

    // Simulation: profit/sharpe lines, buy-all vs short-all antisymmetry,
    // seeded random reproducibility.
    let buy = stdout(&run(&[
        "simulate",
        "--corpus",
        &corpus_s,
        "--strategy",
        "buy-all",
    ]));
    let short = stdout(&run(&[
        "simulate",
        "--corpus",
        &corpus_s,
        "--strategy",
        "short-all",
    ]));
    let profit = |s: &str| -> f64 {
        s.lines()
            .find_map(|l| l.strip_prefix("profit="))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert_eq!(profit(&buy), -profit(&short));
    assert!(buy.contains("sharpe_ratio="));

    let r1 = stdout(&run(&[
        "simulate", "--corpus", &corpus_s, "--strategy", "random", "--seed", "5",
    ]));
    let r2 = stdout(&run(&[
        "simulate", "--corpus", &corpus_s, "--strategy", "random", "--seed", "5",
    ]));
    assert_eq!(r1, r2);

    let sim_dir = dir.join("sim");
    let out = run(&[
        "simulate",
        "--model",
        out_dir.join("model.ckpt").to_str().unwrap(),
        "--corpus",
        &corpus_s,
        "--tau",
        "3",
        "--out",
        sim_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(sim_dir.join("ledger.jsonl").exists());
    assert!(stdout(&out).contains("profit="));

    fs::remove_dir_all(&dir).ok();
}
