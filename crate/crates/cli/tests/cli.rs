use std::path::Path;
use std::process::{Command, Output};

use lyapmkv_cli::Report;
use serde_json::{json, Value};

fn conformal_config(mode: &str) -> Value {
    let (c1, p1, c2, p2) = (2.0f64, 1.1f64, 1.0f64 / 3.0, 0.4f64);
    let rot = |c: f64, p: f64| json!([[c * p.cos(), -c * p.sin()], [c * p.sin(), c * p.cos()]]);
    json!({
        "schema_version": "1",
        "matrices": [rot(c1, p1), rot(c2, p2)],
        "transition": [[0.9, 0.1], [0.2, 0.8]],
        "mode": mode,
        "grid": 1024,
        "mc": { "n": 100000, "replicas": 64, "burn_in": 1000 },
        "seed": 7
    })
}

fn write_config(dir: &Path, cfg: &Value) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

fn run_cli(dir: &Path, cfg: &Value, extra: &[&str]) -> Output {
    let path = write_config(dir, cfg);
    Command::new(env!("CARGO_BIN_EXE_lyapmkv"))
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

fn read_report(dir: &Path) -> Report {
    let text = std::fs::read_to_string(dir.join("out/report.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn error_category(out: &Output) -> String {
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    v["error"]["category"].as_str().unwrap().to_string()
}

#[test]
fn conformal_all_modes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_cli(dir.path(), &conformal_config("all"), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_report(dir.path());
    let exact = (2.0 / 3.0) * 2f64.ln() + (1.0 / 3.0) * (1.0f64 / 3.0).ln();

    let sub = &report.estimates[0];
    let fur = &report.estimates[1];
    assert!((sub.gamma_hat - exact).abs() <= 3.0 * sub.std_error);
    assert!((fur.gamma_hat - exact).abs() <= 3.0 * fur.std_error);
    let sr = report.spectrum.as_ref().unwrap();
    assert!((sr.gamma_perturbation - exact).abs() < 1e-6);
    assert!((sr.gamma_derivative.extrapolated - exact).abs() < 1e-6);
    assert_eq!(sr.grid_convergence.len(), 4);
    assert_eq!(sr.beta.len(), lyapmkv_cli::BETA_POINTS);
    let diag = report.diagnostics.as_ref().unwrap();
    assert!(diag.heuristic);
    assert!((diag.det_closure.unwrap() - 2.0 * exact).abs() < 1e-12);
    assert!(!report.oracle.as_ref().unwrap().entries.is_empty());
    assert!(report.runtime.timings.contains_key("spectrum"));

    let csv = std::fs::read_to_string(dir.path().join("out/traces.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "method,n,value,stderr");
    assert!(csv.lines().any(|l| l.starts_with("furstenberg,")));
}

#[test]
fn singular_matrix_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = conformal_config("estimate");
    cfg["matrices"][1] = json!([[1.0, 2.0], [2.0, 4.0]]);
    let out = run_cli(dir.path(), &cfg, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_category(&out), "matrix-not-invertible");
}

#[test]
fn bad_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = conformal_config("estimate");
    cfg["transition"] = json!([[0.9, 0.2], [0.2, 0.8]]);
    let out = run_cli(dir.path(), &cfg, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_category(&out), "not-stochastic");

    let mut cfg = conformal_config("estimate");
    cfg["transition"] = json!([[1.0, 0.0], [0.2, 0.8]]);
    let out = run_cli(dir.path(), &cfg, &[]);
    assert_eq!(error_category(&out), "full-shift-violation");

    let mut cfg = conformal_config("estimate");
    cfg["schema_version"] = json!("2");
    let out = run_cli(dir.path(), &cfg, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_category(&out), "config-parse");

    let mut cfg = conformal_config("estimate");
    cfg["grid_size"] = json!(5);
    assert_eq!(error_category(&run_cli(dir.path(), &cfg, &[])), "config-parse");

    let three = json!({
        "schema_version": "1",
        "matrices": [[[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 3.0]]],
        "transition": [[1.0]],
        "mode": "spectrum"
    });
    let out = run_cli(dir.path(), &three, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_category(&out), "unsupported-dimension");

    let missing = Command::new(env!("CARGO_BIN_EXE_lyapmkv"))
        .args(["--config", "/nonexistent/config.json"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(1));
    assert_eq!(error_category(&missing), "io");
}

#[test]
fn orthogonal_single_matrix_has_zero_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let p = 0.9f64;
    let cfg = json!({
        "schema_version": "1",
        "matrices": [[[p.cos(), -p.sin()], [p.sin(), p.cos()]]],
        "transition": [[1.0]],
        "mode": "estimate",
        "mc": { "n": 20000, "replicas": 4, "burn_in": 100 }
    });
    let out = run_cli(dir.path(), &cfg, &[]);
    assert!(out.status.success());
    let report = read_report(dir.path());
    for est in &report.estimates {
        assert!(est.gamma_hat.abs() < 1e-12, "{est:?}");
    }
}

#[test]
fn three_dimensional_estimate_skips_grid_stages() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "schema_version": "1",
        "matrices": [
            [[2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.5]],
            [[1.0, 1.0, 0.0], [0.0, 1.0, 1.0], [0.0, 0.0, 1.0]]
        ],
        "transition": [[0.5, 0.5], [0.3, 0.7]],
        "mode": "all",
        "mc": { "n": 5000, "replicas": 4, "burn_in": 100 }
    });
    let out = run_cli(dir.path(), &cfg, &["--workers", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_report(dir.path());
    assert!(report.spectrum.is_none());
    assert_eq!(report.estimates.len(), 5);
    assert!(report.diagnostics.unwrap().irreducibility.is_none());
    assert!(!report.notes.is_empty());
}

#[test]
fn embedded_config_reproduces_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = conformal_config("all");
    cfg["mc"] = json!({ "n": 20000, "replicas": 8, "burn_in": 100 });
    cfg["grid"] = json!(256);
    let out = run_cli(dir.path(), &cfg, &["--workers", "1", "--seed", "11"]);
    assert!(out.status.success());
    let first = read_report(dir.path());
    assert_eq!(first.config.seed, 11);

    let again = tempfile::tempdir().unwrap();
    let embedded = serde_json::to_value(&first.config).unwrap();
    let out = run_cli(again.path(), &embedded, &["--workers", "1"]);
    assert!(out.status.success());
    let second = read_report(again.path());

    let strip = |r: &Report| {
        let mut v = serde_json::to_value(r).unwrap();
        v.as_object_mut().unwrap().remove("runtime");
        v
    };
    assert_eq!(strip(&first), strip(&second));
}

#[test]
fn worker_count_does_not_change_numbers() {
    let mut cfg = conformal_config("all");
    cfg["mc"] = json!({ "n": 20000, "replicas": 8, "burn_in": 100 });
    cfg["grid"] = json!(256);
    let reports: Vec<Value> = ["1", "3"]
        .iter()
        .map(|w| {
            let dir = tempfile::tempdir().unwrap();
            assert!(run_cli(dir.path(), &cfg, &["--workers", w]).status.success());
            let mut v = serde_json::to_value(read_report(dir.path())).unwrap();
            v.as_object_mut().unwrap().remove("runtime");
            v
        })
        .collect();
    assert_eq!(reports[0], reports[1]);
}
