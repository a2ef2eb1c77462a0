use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn dpde(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpde"))
        .args(args)
        .output()
        .expect("failed to run dpde")
}

fn run_ok(args: &[&str]) -> Value {
    let out = dpde(args);
    assert!(
        out.status.success(),
        "dpde {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("summary is not JSON")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_writes_the_requested_cloud() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("square.csv");
    let s = run_ok(&["generate", "--generator", "square", "--cells", "10", "--out", path_str(&csv)]);
    assert_eq!(s["n_points"], 121);
    assert_eq!(s["config"]["generator"], "square");
    let text = std::fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    // header plus one row per point
    assert_eq!(rows.len(), 122);
}

#[test]
fn estimate_boundary_on_an_interval_finds_both_ends() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("b.csv");
    let s = run_ok(&[
        "estimate-boundary",
        "--generator",
        "interval",
        "--n",
        "1001",
        "--eps",
        "0.05",
        "--out",
        path_str(&csv),
    ]);
    assert_eq!(s["n_points"], 1001);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "index,b,eta0,ratio,q_hat");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    let first = &rows[0];
    let last = &rows[rows.len() - 1];
    assert!(first[1] < 0.01 && first[2] == -1.0);
    assert!(last[1] < 0.01 && last[2] == 1.0);
    // the density is 1/2 on [-1, 1]
    assert!(rows.iter().all(|r| (r[4] - 0.5).abs() < 0.01));
}

#[test]
fn operators_round_trip_through_a_directory() {
    let dir = tempfile::tempdir().unwrap();
    let ops = dir.path().join("ops");
    let built = run_ok(&[
        "build-operators",
        "--generator",
        "square",
        "--cells",
        "30",
        "--eps",
        "0.1",
        "--out",
        path_str(&ops),
    ]);
    let from_dir = run_ok(&["solve", "--problem", "square-dirichlet-sine", "--operators", path_str(&ops)]);
    let direct = run_ok(&["solve", "--problem", "square-dirichlet-sine", "--cells", "30", "--eps", "0.1"]);
    assert_eq!(built["n_points"], from_dir["n_points"]);
    assert_eq!(from_dir["eps"], 0.1);
    let a = from_dir["l2_error"].as_f64().unwrap();
    let b = direct["l2_error"].as_f64().unwrap();
    assert!((a - b).abs() <= 1e-6 * b, "{a} vs {b}");
}

#[test]
fn solve_with_automatic_bandwidth() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("u.csv");
    let summary = dir.path().join("summary.json");
    let s = run_ok(&[
        "solve",
        "--problem",
        "square-dirichlet-quadratic",
        "--cells",
        "40",
        "--eps",
        "auto",
        "--out",
        path_str(&out),
        "--summary",
        path_str(&summary),
    ]);
    let err = s["l2_error"].as_f64().unwrap();
    assert!(err.is_finite() && err > 0.0 && err < 0.2, "{err}");
    assert!((s["eps"].as_f64().unwrap() - 0.075).abs() < 1e-9);
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(saved, s);
    let header = std::fs::read_to_string(&out).unwrap();
    assert!(header.starts_with("x0,x1,u,u_exact,error"));
}

#[test]
fn custom_problem_with_zero_data_gives_zero() {
    let dir = tempfile::tempdir().unwrap();
    let rhs = dir.path().join("f.txt");
    std::fs::write(&rhs, "value\n".to_string() + &"0\n".repeat(441)).unwrap();
    let out = dir.path().join("u.csv");
    run_ok(&[
        "solve",
        "--problem",
        "custom",
        "--kind",
        "dirichlet",
        "--generator",
        "square",
        "--cells",
        "20",
        "--eps",
        "0.15",
        "--rhs",
        path_str(&rhs),
        "--out",
        path_str(&out),
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    for line in text.lines().skip(1) {
        let u: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(u, 0.0);
    }
}

#[test]
fn verify_uniform_energy() {
    let s = run_ok(&["verify", "--experiment", "fig3", "--eps-sweep", "0.001,0.002,0.005"]);
    let min = s["result"]["min_error"].as_f64().unwrap();
    assert!(min <= 0.02, "{min}");
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"generator": "square", "cells": 8, "out": "unused.csv"}"#).unwrap();
    let out = dir.path().join("grid.csv");
    let s = run_ok(&["--config", path_str(&cfg), "generate", "--cells", "5", "--out", path_str(&out)]);
    assert_eq!(s["n_points"], 36);
    assert_eq!(s["config"]["cells"], 5);
}

#[test]
fn bad_input_exits_with_code_2() {
    let cases: &[&[&str]] = &[
        &["solve", "--problem", "no-such-problem"],
        &["generate", "--generator", "square", "--cells", "5"],
        &["solve", "--problem", "square-dirichlet-sine", "--eps", "-1"],
        &["solve", "--problem", "square-dirichlet-sine", "--eps-sweep", "0.2,0.1"],
        &["estimate-boundary", "--input", "/nonexistent/points.csv", "--m", "2"],
    ];
    for args in cases {
        let out = dpde(args);
        assert_eq!(out.status.code(), Some(2), "dpde {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"cels": 8}"#).unwrap();
    let out = dpde(&["--config", path_str(&cfg), "generate", "--generator", "square"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn summaries_are_deterministic() {
    let args = [
        "solve",
        "--problem",
        "hemisphere-dirichlet",
        "--n",
        "800",
        "--seed",
        "3",
        "--eps",
        "0.2",
    ];
    let a = dpde(&args);
    let b = dpde(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let single: Vec<&str> = ["--workers", "1"].iter().chain(&args).copied().collect();
    let one = dpde(&single);
    assert_eq!(one.stdout, a.stdout);
}
