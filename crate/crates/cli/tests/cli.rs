//! End-to-end tests of the `rocarc` binary: exit codes, artifact schemas,
//! and byte-level determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn rocarc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rocarc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn tmp(dir: &tempfile::TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

#[test]
fn fit_is_deterministic_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let a = tmp(&dir, "a.json");
    let b = tmp(&dir, "b.json");
    for out in [&a, &b] {
        let r = rocarc(&[
            "fit",
            "--gen",
            "gauss",
            "--delta",
            "2",
            "--n",
            "60",
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(r.status.success(), "stderr: {}", String::from_utf8_lossy(&r.stderr));
    }
    assert_eq!(read(&a), read(&b), "model files must be byte-identical");
    let doc: serde_json::Value = serde_json::from_slice(&read(&a)).unwrap();
    for key in ["bandwidth", "support_points", "alpha", "clip_range"] {
        assert!(doc.get(key).is_some(), "model JSON missing {key}");
    }
    let diag: serde_json::Value =
        serde_json::from_slice(&read(&a.with_extension("diagnostics.json"))).unwrap();
    assert_eq!(diag["converged"], serde_json::Value::Bool(true));
    assert!(diag["manifest"]["timings_ms"].is_array());
}

#[test]
fn missing_input_exits_one() {
    let r = rocarc(&[
        "divergence",
        "--input",
        "/nonexistent/data.csv",
        "--label",
        "y",
        "--out",
        "/tmp/never-written.json",
    ]);
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn bad_flags_exit_one() {
    let r = rocarc(&["fit", "--gen", "gauss", "--out", "/tmp/x.json"]);
    assert_eq!(r.status.code(), Some(1), "generator without --n");
    let r = rocarc(&["fit", "--gen", "gauss", "--n", "20", "--lambda", "banana", "--out", "/tmp/x.json"]);
    assert_eq!(r.status.code(), Some(1));
    let r = rocarc(&["definitely-not-a-subcommand"]);
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn non_convergence_exits_two_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let out = tmp(&dir, "model.json");
    let r = rocarc(&[
        "fit",
        "--gen",
        "gauss",
        "--delta",
        "2",
        "--n",
        "40",
        "--max-newton-iters",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(2));
    let diag: serde_json::Value =
        serde_json::from_slice(&read(&out.with_extension("diagnostics.json"))).unwrap();
    assert_eq!(diag["converged"], serde_json::Value::Bool(false));
    assert!(!out.exists(), "no model file on non-convergence");
}

#[test]
fn figure_bounds_schema_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let a = tmp(&dir, "bounds_a.csv");
    let b = tmp(&dir, "bounds_b.csv");
    for out in [&a, &b] {
        let r = rocarc(&[
            "figure-bounds",
            "--delta-min",
            "0",
            "--delta-max",
            "5",
            "--steps",
            "11",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(r.status.success(), "stderr: {}", String::from_utf8_lossy(&r.stderr));
    }
    assert_eq!(read(&a), read(&b));
    let text = String::from_utf8(read(&a)).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "delta,tv,js,w1,roc_div,roc_div_rescaled,prop2_lower,prop2_upper,pinsker_ub,bh_ub"
    );
    assert_eq!(lines.len(), 12, "header + 11 rows");
    // First row is delta = 0: every divergence column vanishes.
    let first: Vec<f64> = lines[1].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first[0], 0.0);
    for (i, v) in first.iter().enumerate().skip(1) {
        if i == 6 {
            continue; // prop2_lower is a max over a and may sit slightly below 0
        }
        assert!(v.abs() < 1e-6, "column {i} at delta=0 is {v}");
    }
    assert!(a.with_extension("csv.manifest.json").exists());
    // Bad range exits 1.
    let r = rocarc(&["figure-bounds", "--steps", "1", "--out", a.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn roc_curve_and_surface_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = tmp(&dir, "toy.csv");
    std::fs::write(&data, "x,y\n2,1\n3,1\n0,-1\n1,-1\n").unwrap();
    let out = tmp(&dir, "roc.csv");
    let r = rocarc(&[
        "roc",
        "--input",
        data.to_str().unwrap(),
        "--label",
        "y",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(r.status.success(), "stderr: {}", String::from_utf8_lossy(&r.stderr));
    let text = String::from_utf8(read(&out)).unwrap();
    assert_eq!(text.lines().next().unwrap(), "threshold,fpr,tpr");
    assert!(
        text.lines().any(|l| l.ends_with(",0,1")),
        "separable data passes through (fpr=0, tpr=1): {text}"
    );

    let surf = tmp(&dir, "surface.csv");
    let r = rocarc(&[
        "roc",
        "--gen",
        "gauss",
        "--delta",
        "1",
        "--n",
        "40",
        "--seed",
        "3",
        "--surface",
        "--alphas",
        "6",
        "--taus",
        "50",
        "--out",
        surf.to_str().unwrap(),
    ]);
    assert!(r.status.success(), "stderr: {}", String::from_utf8_lossy(&r.stderr));
    let text = String::from_utf8(read(&surf)).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "alpha,tau,fpr,tpr");
    assert_eq!(lines.len(), 301, "header + 6*50 rows");
    for line in lines.iter().skip(1).filter(|l| l.starts_with("0.5,")) {
        let cols: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(cols[2], cols[3], "alpha=1/2 row must sit on the diagonal");
    }
}

#[test]
fn benchmark_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let csv_a = tmp(&dir, "bench_a.csv");
    let csv_b = tmp(&dir, "bench_b.csv");
    let json_out = tmp(&dir, "bench.json");
    for out in [&csv_a, &csv_b] {
        let r = rocarc(&[
            "benchmark",
            "--npos-grid",
            "8,12",
            "--nneg",
            "40",
            "--repeats",
            "2",
            "--test-size",
            "300",
            "--seed",
            "5",
            "--out-csv",
            out.to_str().unwrap(),
            "--out-json",
            json_out.to_str().unwrap(),
        ]);
        assert!(r.status.success(), "stderr: {}", String::from_utf8_lossy(&r.stderr));
    }
    assert_eq!(read(&csv_a), read(&csv_b), "benchmark CSV must be byte-identical");
    let text = String::from_utf8(read(&csv_a)).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "method,n_pos,repeat,auc");
    assert_eq!(lines.len(), 1 + 2 * 2 * 3, "header + grid*repeats*methods");
    let doc: serde_json::Value = serde_json::from_slice(&read(&json_out)).unwrap();
    let summaries = doc["summaries"].as_array().unwrap();
    assert_eq!(summaries.len(), 6);
    for s in summaries {
        assert!(s["mean_auc"].is_number() && s["stderr"].is_number());
    }
}
