use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_widomlab"))
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn sine_config(tolerances: &str) -> String {
    format!(
        r#"{{
  "schema_version": 1,
  "dimension": 1,
  "lambda": {{"kind": "interval", "a": 0, "b": 1}},
  "gamma": {{"kind": "interval", "a": -1, "b": 1}},
  "a1": {{"kind": "identity", "n": 1}},
  "test_function": {{"kind": "polynomial", "coeffs": [0, 1, -1]}},
  "l_values": [50, 100, 200, 400, 800],
  "tolerances": {tolerances}
}}"#
    )
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn missing_config_exits_with_one() {
    let out = run(&["coeff", "--config", "/nonexistent/widomlab.json"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("/nonexistent/widomlab.json"), "{err}");
}

#[test]
fn malformed_config_names_the_pointer() {
    let dir = TempDir::new().unwrap();
    let bad = sine_config("{}").replace(r#""l_values": [50"#, r#""l_values": ["fifty""#);
    let p = write(&dir, "bad.json", &bad);
    let out = run(&["sweep", "--config", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("/l_values/0"), "{err}");
}

#[test]
fn coeff_reports_the_square_boundary_term() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("coeff.json");
    let out = run(&[
        "coeff",
        "--config",
        repo_config("squares_d2.json").to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_path).unwrap()).unwrap();
    let w1 = v["W1"].as_f64().unwrap();
    assert!((w1 - 4.0 / std::f64::consts::PI).abs() <= 1e-6, "{w1}");
    assert!(v["est_error"].as_f64().unwrap() >= 0.0);
}

#[test]
fn verify_passes_and_fails_with_exit_codes() {
    let dir = TempDir::new().unwrap();
    let good = write(&dir, "good.json", &sine_config(r#"{"w0_rel": 0.01, "w1_rel": 0.05, "abs": 1e-3}"#));
    let out = run(&["verify", "--config", good.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["verdict"], "PASS");
    assert!(report["rel_err_W1"].as_f64().unwrap() <= 0.05);

    let strict = write(&dir, "strict.json", &sine_config(r#"{"w0_rel": 1e-14, "w1_rel": 1e-14, "abs": 1e-14}"#));
    let out = run(&["verify", "--config", strict.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["verdict"], "FAIL");
}

#[test]
fn sweep_writes_the_csv_table() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "sine.json", &sine_config("{}"));
    let table = dir.path().join("table.csv");
    let out = run(&["sweep", "--config", cfg.to_str().unwrap(), "--out", table.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(table).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("L,trace,N,clamp"));
    assert_eq!(lines.count(), 5);
}

#[test]
fn operator_dump_round_trips() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "sine.json", &sine_config("{}"));
    let dump = dir.path().join("op.bin");
    let out = run(&["operator", "--config", cfg.to_str().unwrap(), "--l", "20", "--out", dump.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, m) = widomlab::operators::read_dump(std::fs::File::open(dump).unwrap()).unwrap();
    assert_eq!(header.rows as usize, m.nrows());
    assert_eq!(header.block_n, 1);
    assert_eq!(header.scale_l, 20.0);
    let trace: f64 = (0..m.nrows()).map(|i| m[(i, i)].re).sum();
    assert!((trace - 20.0 / std::f64::consts::PI).abs() <= 1e-4);

    let out = run(&["operator", "--config", cfg.to_str().unwrap(), "--l", "20"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["provenance"], "GL");
    assert_eq!(v["eigenvalues"].as_array().unwrap().len(), v["dim"].as_u64().unwrap() as usize);
}
