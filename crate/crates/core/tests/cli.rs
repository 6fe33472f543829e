use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pdmp_core::cli::{validate_outputs, MANIFEST, MEASURE, REPORT};
use serde_json::Value;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn pdmp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdmp")).args(args).output().expect("spawn pdmp")
}

fn run_ok(sub: &str, cfg: &str, out: &Path, extra: &[&str]) -> Value {
    let cfg = config(cfg);
    let mut args = vec![sub, "--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = pdmp(&args);
    assert!(o.status.success(), "{sub} failed: {}", String::from_utf8_lossy(&o.stderr));
    let manifest = validate_outputs(out).unwrap();
    assert_eq!(manifest.command, sub);
    assert!(manifest.artifacts.iter().any(|a| a == MANIFEST));
    serde_json::from_str(&std::fs::read_to_string(out.join(REPORT)).unwrap()).unwrap()
}

#[test]
fn control_sets_two_well_has_one_invariant_class() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_ok("control-sets", "twowell.json", dir.path(), &["--h", "0.05", "--tau", "0.5"]);
    let classes = r["result"]["control_sets"]["classes"].as_array().unwrap();
    let inv = classes.iter().filter(|c| c["kind"] == "invariant").count();
    assert_eq!(inv, 1);
    assert_eq!(r["params"]["h"], 0.05);
}

#[test]
fn verify_support_bistable_has_no_excess() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_ok("verify-support", "bistable.json", dir.path(), &["--horizon", "1e4", "--seed", "7"]);
    assert_eq!(r["seed"], 7);
    let excess = r["result"]["support"]["excess_mass"].as_f64().unwrap();
    assert!(excess < 1e-3, "excess {excess}");
    assert!(dir.path().join(MEASURE).exists());
}

#[test]
fn negative_horizon_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("twowell.json");
    let o = pdmp(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--horizon",
        "-5",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("horizon"));
}

#[test]
fn unknown_subcommand_and_missing_config_exit_two() {
    let o = pdmp(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    let dir = tempfile::tempdir().unwrap();
    let o = pdmp(&["lie-rank", "--config", "/nonexistent/cfg.json", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    let text = std::fs::read_to_string(config("twowell.json"))
        .unwrap()
        .replace("[0.5, 0.5], [0.5, 0.5]", "[0.7, 0.7], [0.5, 0.5]");
    std::fs::write(&cfg, text).unwrap();
    let o = pdmp(&["control-sets", "--config", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("row"));
}

#[test]
fn every_subcommand_writes_valid_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[(&str, &str, &[&str])] = &[
        ("simulate", "twowell.json", &["--horizon", "20"]),
        ("simulate", "rotation.json", &["--horizon", "5", "--x0", "1,-1", "--mode0", "1"]),
        ("control-sets", "rotation.json", &["--h", "0.5"]),
        ("measure", "twowell.json", &["--horizon", "200", "--runs", "3", "--threshold", "0.01"]),
        ("verify-support", "twowell.json", &["--horizon", "200"]),
        ("lie-rank", "rotation.json", &["--depth", "2", "--points", "0,0;1,2"]),
        ("invariance-audit", "bistable.json", &["--n-boundary", "3"]),
    ];
    for (k, (sub, cfg, extra)) in cases.iter().enumerate() {
        let out = dir.path().join(k.to_string());
        let r = run_ok(sub, cfg, &out, extra);
        assert_eq!(r["command"], *sub);
        assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
    }
}

#[test]
fn simulate_writes_tidy_csv() {
    let dir = tempfile::tempdir().unwrap();
    run_ok("simulate", "twowell.json", dir.path(), &["--horizon", "3", "--sample-dt", "0.5"]);
    let csv = std::fs::read_to_string(dir.path().join("paths.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    let width = header.split(',').count();
    let rows: Vec<&str> = lines.collect();
    assert!(rows.len() >= 7);
    assert!(rows.iter().all(|r| r.split(',').count() == width));
}

#[test]
fn same_seed_gives_identical_artifacts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["--horizon", "300", "--runs", "4", "--seed", "11"];
    run_ok("measure", "twowell.json", a.path(), &args);
    run_ok("measure", "twowell.json", b.path(), &[&args[..], &["--workers", "2"]].concat());
    for f in [REPORT, MEASURE] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
    let c = tempfile::tempdir().unwrap();
    run_ok("measure", "twowell.json", c.path(), &["--horizon", "300", "--runs", "4", "--seed", "12"]);
    assert_ne!(std::fs::read(a.path().join(MEASURE)).unwrap(), std::fs::read(c.path().join(MEASURE)).unwrap());
}

#[test]
fn flags_override_config_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_ok("control-sets", "twowell.json", dir.path(), &[]);
    assert_eq!(r["params"]["h"], 0.05);
    assert_eq!(r["seed"], 1);
    let r = run_ok("control-sets", "twowell.json", dir.path(), &["--h", "0.1", "--seed", "3"]);
    assert_eq!(r["params"]["h"], 0.1);
    assert_eq!(r["seed"], 3);
    let cells = r["result"]["control_sets"]["grid"]["counts"][0].as_u64().unwrap();
    assert_eq!(cells, 60);
}
