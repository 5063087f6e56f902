use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL_GRID: &[&str] = &[
    "--scores",
    "ctrs",
    "--models",
    "GNB,KNN_5",
    "--windows",
    "3,5",
    "--n-lambda",
    "1,3",
    "--boot",
    "200",
];

fn dmdc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dmdc"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("spawn dmdc")
}

fn run_ok(args: &[&str]) {
    let out = dmdc(args);
    assert!(
        out.status.success(),
        "dmdc {args:?} exited with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Synthesizes a corpus into `dir` and returns the session file.
fn corpus(dir: &Path, extra: &[&str]) -> PathBuf {
    let mut args = vec!["synth", "--out", s(dir)];
    args.extend_from_slice(extra);
    run_ok(&args);
    dir.join("corpus.jsonl")
}

fn read(p: &Path) -> String {
    fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn synth_is_reproducible_and_null_shares_dynamics() {
    let tmp = TempDir::new().unwrap();
    let (a, b, n) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("n"));
    corpus(&a, &["--seed", "5"]);
    corpus(&b, &["--seed", "5"]);
    assert_eq!(read(&a.join("corpus.jsonl")), read(&b.join("corpus.jsonl")));
    assert_eq!(read(&a.join("corpus_manifest.json")), read(&b.join("corpus_manifest.json")));
    assert_eq!(read(&a.join("corpus.jsonl")).lines().count(), 40);

    corpus(&n, &["--seed", "5", "--null"]);
    let manifest: serde_json::Value = serde_json::from_str(&read(&n.join("corpus_manifest.json"))).unwrap();
    let systems = manifest["systems"].as_array().unwrap();
    assert_eq!(systems[0]["eigenvalues_t"], systems[1]["eigenvalues_t"]);
    let separable: serde_json::Value = serde_json::from_str(&read(&a.join("corpus_manifest.json"))).unwrap();
    assert_ne!(separable["systems"][0]["eigenvalues_t"], separable["systems"][1]["eigenvalues_t"]);
}

#[test]
fn featurize_rows_bounds_and_determinism() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[synth]\nn_sessions = 4\nn_clients = 2\nmin_len = 10\nmax_len = 10\n");
    let input = corpus(&tmp.path().join("c"), &["--config", s(&cfg)]);
    let (o1, o2) = (tmp.path().join("f1"), tmp.path().join("f2"));
    for o in [&o1, &o2] {
        run_ok(&["featurize", "--input", s(&input), "--out", s(o), "--windows", "3", "--n-lambda", "1,3"]);
    }
    for f in ["features.csv", "spectra.csv", "labels.csv"] {
        assert_eq!(read(&o1.join(f)), read(&o2.join(f)), "{f} differs between runs");
    }
    // 4 sessions x 7 windows x 2 n_lambda x 3 input types.
    let features = read(&o1.join("features.csv"));
    assert_eq!(features.lines().count(), 1 + 4 * 7 * 2 * 3);
    let s0000_t1 = features.lines().filter(|l| l.starts_with("s0000,") && l.contains(",T,1,")).count();
    assert_eq!(s0000_t1, 7);
    let spectra = read(&o1.join("spectra.csv"));
    for line in spectra.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let w: usize = f[2].parse().unwrap();
        assert!(f[3].parse::<usize>().unwrap() <= w);
        assert!(f[4].parse::<usize>().unwrap() <= w);
    }
}

#[test]
fn evaluate_reports_and_is_independent_of_jobs() {
    let tmp = TempDir::new().unwrap();
    let input = corpus(&tmp.path().join("c"), &[]);
    let (o1, o2) = (tmp.path().join("e1"), tmp.path().join("e2"));
    for (o, jobs) in [(&o1, "1"), (&o2, "3")] {
        let mut args = vec!["evaluate", "--input", s(&input), "--out", s(o), "--jobs", jobs];
        args.extend_from_slice(SMALL_GRID);
        run_ok(&args);
    }
    for f in [
        "table2.csv",
        "table3.csv",
        "table4.csv",
        "table5.csv",
        "cells.csv",
        "predictions.csv",
        "models/ctrs/all.model",
        "models/ctrs/fold0.model",
    ] {
        assert_eq!(fs::read(o1.join(f)).unwrap(), fs::read(o2.join(f)).unwrap(), "{f} differs");
    }
    let t4 = read(&o1.join("table4.csv"));
    assert_eq!(t4.lines().next().unwrap(), "Score,Model,Input Type,w,n_λ,F1");
    let best = t4
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .fold(0.0, f64::max);
    assert!(best >= 0.95, "best local F1 {best}");
    assert_eq!(
        read(&o1.join("table5.csv")).lines().next().unwrap(),
        "Score,Model,n_λ,Input Type,w,Accumulator,Aggregator,F1"
    );
    let manifest: serde_json::Value = serde_json::from_str(&read(&o1.join("run_manifest.json"))).unwrap();
    assert_eq!(manifest["failed_cells"], 0);
    assert_eq!(manifest["cells"], 2 * 2 * 2 * 3);

    // The standalone baseline command uses the same seeds.
    let b = tmp.path().join("b");
    let mut args = vec!["baseline", "--input", s(&input), "--out", s(&b)];
    args.extend_from_slice(SMALL_GRID);
    run_ok(&args);
    assert_eq!(read(&b.join("table2.csv")), read(&o1.join("table2.csv")));
    assert_eq!(read(&b.join("table3.csv")), read(&o1.join("table3.csv")));
}

/// Rewrites every session's `ag` sub-score to 6, so `ag` has a single label.
fn saturate_ag(input: &Path, output: &Path) {
    let text: Vec<String> = read(input)
        .lines()
        .map(|line| {
            let mut v: serde_json::Value = serde_json::from_str(line).unwrap();
            v["subscores"]["ag"] = serde_json::json!(6);
            v.to_string()
        })
        .collect();
    fs::write(output, text.join("\n") + "\n").unwrap();
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let input = corpus(&tmp.path().join("c"), &["--seed", "2"]);
    let tweaked = tmp.path().join("tweaked.jsonl");
    saturate_ag(&input, &tweaked);
    let out = tmp.path().join("o");
    let grid = ["--models", "GNB", "--windows", "3", "--n-lambda", "1", "--input-types", "T", "--boot", "100"];

    let mut args = vec!["evaluate", "--input", s(&tweaked), "--out", s(&out), "--scores", "ctrs,ag"];
    args.extend_from_slice(&grid);
    assert_eq!(dmdc(&args).status.code(), Some(1), "one score cannot train");

    let mut args = vec!["evaluate", "--input", s(&tweaked), "--out", s(&out), "--scores", "ag"];
    args.extend_from_slice(&grid);
    assert_eq!(dmdc(&args).status.code(), Some(2), "no cell can train");

    let bad = dmdc(&["evaluate", "--input", s(&input), "--out", s(&out), "--models", "forest"]);
    assert_eq!(bad.status.code(), Some(2));

    let missing = dmdc(&["featurize", "--input", s(&tmp.path().join("absent.jsonl")), "--out", s(&out)]);
    assert_eq!(missing.status.code(), Some(3));

    let blocker = tmp.path().join("file");
    fs::write(&blocker, "").unwrap();
    let unwritable = dmdc(&["synth", "--out", s(&blocker.join("sub"))]);
    assert_eq!(unwritable.status.code(), Some(3));
}

fn final_count(csv: &str) -> (usize, usize) {
    let last = csv.lines().last().unwrap();
    let f: Vec<&str> = last.split(',').collect();
    (f[1].parse::<usize>().unwrap() + 1, f[2].parse().unwrap())
}

#[test]
fn trajectories() {
    let tmp = TempDir::new().unwrap();
    let input = corpus(&tmp.path().join("c"), &[]);
    let out = tmp.path().join("o");
    let mut args = vec!["evaluate", "--input", s(&input), "--out", s(&out)];
    args.extend_from_slice(SMALL_GRID);
    run_ok(&args);

    // Odd session indices carry the high label.
    run_ok(&["trajectory", "--input", s(&input), "--out", s(&out), "--session", "s0001"]);
    run_ok(&["trajectory", "--input", s(&input), "--out", s(&out), "--session", "s0002"]);
    let high = read(&out.join("trajectory_s0001_ctrs.csv"));
    let low = read(&out.join("trajectory_s0002_ctrs.csv"));
    assert_eq!(high.lines().next().unwrap(), "session_id,window_index,cumulative_score");
    let (hn, hc) = final_count(&high);
    let (ln, lc) = final_count(&low);
    assert!(hc as f64 / hn as f64 > lc as f64 / ln as f64, "high {hc}/{hn} vs low {lc}/{ln}");

    let missing = dmdc(&["trajectory", "--input", s(&input), "--out", s(&out), "--session", "nobody"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("not found"));

    // A session with exactly one window of the stored size.
    let best: serde_json::Value = serde_json::from_str(&read(&out.join("run_manifest.json"))).unwrap();
    let w = best["best"][0]["w"].as_u64().unwrap();
    let cfg = write_config(
        tmp.path(),
        &format!("[synth]\nn_sessions = 2\nn_clients = 1\nmin_len = {0}\nmax_len = {0}\n", w + 1),
    );
    let short = corpus(&tmp.path().join("short"), &["--config", s(&cfg)]);
    run_ok(&["trajectory", "--input", s(&short), "--out", s(&out), "--session", "s0001"]);
    let one = read(&out.join("trajectory_s0001_ctrs.csv"));
    assert_eq!(one.lines().count(), 2, "{one}");
}
