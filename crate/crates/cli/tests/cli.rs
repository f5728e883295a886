use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn sptree(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sptree"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = sptree(args);
    assert!(
        out.status.success(),
        "sptree {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_matrix(path: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

fn manifest_files_exist(dir: &Path) -> Value {
    let m: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    for f in m["files"].as_array().unwrap() {
        let path = dir.join(f["path"].as_str().unwrap());
        assert!(path.exists(), "manifest lists missing {}", path.display());
    }
    assert_eq!(m["tool"], "sptree");
    m
}

fn simulated(dir: &Path, p: usize) -> PathBuf {
    let sim = dir.join("sim");
    ok(&["simulate", "--kind", "oracle-tree", "--p", &p.to_string(), "--n", "60", "--seed", "4", "--out", s(&sim)]);
    sim.join("data_r0.csv")
}

#[test]
fn fit_writes_draws_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(dir.path(), 10);
    let out = dir.path().join("fit");
    ok(&[
        "fit", "--data", s(&data), "--out", s(&out), "--iters", "120", "--burnin", "20", "--chains", "2", "--seed", "9",
    ]);
    manifest_files_exist(&out);
    for c in 0..2 {
        let lines = std::fs::read_to_string(out.join(format!("draws_chain{c}.jsonl"))).unwrap();
        assert_eq!(lines.lines().count(), 100);
        let first: Value = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
        assert_eq!(first["edges"].as_array().unwrap().len(), 9);
        let tau = std::fs::read_to_string(out.join(format!("tau_trace_chain{c}.csv"))).unwrap();
        assert_eq!(tau.lines().count(), 101);
    }
    let mcp = read_matrix(&out.join("mcp.csv"));
    let total: f64 = mcp.iter().flatten().sum::<f64>() / 2.0;
    assert!((total - 9.0).abs() < 1e-9);
    let diag: Value = serde_json::from_str(&std::fs::read_to_string(out.join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag.as_array().unwrap().len(), 2);
}

#[test]
fn fit_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(dir.path(), 8);
    let run = |name: &str| {
        let out = dir.path().join(name);
        ok(&["fit", "--data", s(&data), "--out", s(&out), "--iters", "60", "--burnin", "10", "--seed", "3"]);
        std::fs::read(out.join("draws_chain0.jsonl")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn mode_and_mcp_agree_at_tau_hat() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(dir.path(), 12);
    let mode = dir.path().join("mode");
    let mcp = dir.path().join("mcp");
    ok(&["mode", "--data", s(&data), "--out", s(&mode)]);
    ok(&["mcp", "--data", s(&data), "--out", s(&mcp)]);
    manifest_files_exist(&mode);
    manifest_files_exist(&mcp);
    let tree = std::fs::read_to_string(mode.join("mode_tree.csv")).unwrap();
    assert_eq!(tree.lines().next(), Some("j,k"));
    assert_eq!(tree.lines().count(), 12);
    assert_eq!(read_matrix(&mode.join("mcp.csv")), read_matrix(&mcp.join("mcp.csv")));
    let a: Value = serde_json::from_str(&std::fs::read_to_string(mode.join("summary.json")).unwrap()).unwrap();
    let b: Value = serde_json::from_str(&std::fs::read_to_string(mcp.join("summary.json")).unwrap()).unwrap();
    assert_eq!(a["tau_hat"], b["tau"]);
    assert_eq!(a["log_z"], b["log_z"]);
}

#[test]
fn config_selects_prior_and_scale() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(dir.path(), 6);
    let cfg = dir.path().join("config.json");
    std::fs::write(&cfg, r#"{"alpha": 3, "prior": {"kind": "degree", "alpha_dir": 2}}"#).unwrap();
    let out = dir.path().join("mcp");
    ok(&["mcp", "--data", s(&data), "--config", s(&cfg), "--tau", "0.7", "--out", s(&out)]);
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["tau"], 0.7);
    assert_eq!(summary["alpha"], 3.0);

    let eta = dir.path().join("eta.csv");
    let rows: Vec<String> = (0..6).map(|_| ["1"; 6].join(",")).collect();
    std::fs::write(&eta, rows.join("\n")).unwrap();
    std::fs::write(&cfg, r#"{"prior": {"kind": "edge", "eta": "eta.csv"}}"#).unwrap();
    ok(&["mcp", "--data", s(&data), "--config", s(&cfg), "--tau", "0.7", "--out", s(&dir.path().join("edge"))]);
}

#[test]
fn hmm_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    ok(&[
        "simulate", "--kind", "hmm", "--p", "6", "--states", "2", "--t-len", "30", "--series", "4", "--out", s(&sim),
    ]);
    manifest_files_exist(&sim);
    let out = dir.path().join("fit");
    ok(&[
        "hmm", "--input", s(&sim.join("series")), "--out", s(&out), "--states", "2", "--iters", "40", "--burnin", "20",
    ]);
    manifest_files_exist(&out);
    let class = std::fs::read_to_string(out.join("classification.csv")).unwrap();
    let mut lines = class.lines();
    assert_eq!(lines.next(), Some("series,held_out,true_condition,pr_first,decision"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 8);
    assert_eq!(rows.iter().filter(|r| r.contains(",true,")).count(), 4);
    let trans: Value = serde_json::from_str(&std::fs::read_to_string(out.join("transitions.json")).unwrap()).unwrap();
    for t in trans["trans"].as_array().unwrap() {
        for row in t.as_array().unwrap() {
            let sum: f64 = row.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn benchmark_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        ok(&[
            "benchmark", "--p", "12", "--replicates", "3", "--n-grid", "20,60", "--methods", "mode,threshold:0.5",
            "--seed", "5", "--out", s(&out),
        ]);
        manifest_files_exist(&out);
        std::fs::read_to_string(out.join("recovery_summary.csv")).unwrap()
    };
    let a = run("a");
    assert_eq!(a, run("b"));
    assert_eq!(a.lines().count(), 5);
}

#[test]
fn manifold_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("moons");
    ok(&["simulate", "--kind", "two-moons", "--p", "20", "--iters", "60", "--burnin", "20", "--out", s(&out)]);
    manifest_files_exist(&out);
    let points = std::fs::read_to_string(out.join("points.csv")).unwrap();
    assert_eq!(points.lines().count(), 21);
}

#[test]
fn errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = sptree(&["mode", "--data", "/nonexistent/data.csv", "--out", s(dir.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/data.csv"));
    let out = sptree(&["benchmark", "--methods", "lasso", "--out", s(dir.path())]);
    assert!(!out.status.success());
    let out = sptree(&["hmm", "--input", s(dir.path()), "--out", s(dir.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("manifest.json"));
}
