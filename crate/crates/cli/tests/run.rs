use std::process::Command;

use circuitlab::config::{parse, Overrides};
use circuitlab::models::execute;
use circuitlab::output::{csv_bytes, num};
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_circuitlab");

fn run_bin(cfg: &str, extra: &[&str]) -> (tempfile::TempDir, std::process::Output) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    std::fs::write(&path, cfg).unwrap();
    let out_dir = dir.path().join("out");
    let mut args = vec!["run", path.to_str().unwrap(), "--out", out_dir.to_str().unwrap()];
    args.extend(extra);
    let out = Command::new(BIN).args(&args).output().unwrap();
    (dir, out)
}

#[test]
fn numbers_round_trip() {
    for x in [0.1, 1.0 / 3.0, 1e-300, 123456789.0, -2.5, f64::MIN_POSITIVE] {
        assert_eq!(num(x).parse::<f64>().unwrap(), x);
    }
    assert_eq!(num(-0.0), "0");
    assert_eq!(num(2.0), "2");
}

#[test]
fn csv_is_crlf_and_quoted() {
    let b = csv_bytes(&["a", "b"], vec![vec!["1".to_string(), "x,y".to_string()]]);
    assert_eq!(String::from_utf8(b).unwrap(), "a,b\r\n1,\"x,y\"\r\n");
}

#[test]
fn ledger_run_writes_manifest_with_checksums() {
    let (dir, out) = run_bin(r#"{"model": "ledger"}"#, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let root = dir.path().join("out");
    let m: Value = serde_json::from_str(&std::fs::read_to_string(root.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["model"], "ledger");
    assert_eq!(m["seed"], 1);
    let files: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|o| o["file"].as_str().unwrap()).collect();
    assert_eq!(files, ["ledger.csv", "summary.json", "effective_config.json"]);
    for o in m["outputs"].as_array().unwrap() {
        let bytes = std::fs::read(root.join(o["file"].as_str().unwrap())).unwrap();
        assert_eq!(bytes.len() as u64, o["bytes"].as_u64().unwrap());
        use sha2::Digest;
        assert_eq!(hex::encode(sha2::Sha256::digest(&bytes)), o["sha256"].as_str().unwrap());
    }
    let csv = std::fs::read_to_string(root.join("ledger.csv")).unwrap();
    assert!(csv.contains("0,2,interbank_loan,1,24,11,4,27,7,5,2\r\n"), "{csv}");
}

#[test]
fn svg_flag_adds_plots() {
    let (dir, out) = run_bin(r#"{"model": "dividend", "run": {"horizon": 5}}"#, &["--svg"]);
    assert!(out.status.success());
    let svg = std::fs::read_to_string(dir.path().join("out/excess_value.svg")).unwrap();
    assert!(svg.starts_with("<?xml") || svg.starts_with("<svg"));
    assert!(svg.trim_end().ends_with("</svg>"));
}

#[test]
fn schema_errors_exit_two_with_json_report() {
    let (_dir, out) = run_bin(r#"{"model": "wedge", "parameters": {"quadrature": {"ordr": 3}}}"#, &[]);
    assert_eq!(out.status.code(), Some(2));
    let report: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(report["error"], "schema");
    assert_eq!(report["key"], "parameters.quadrature.ordr");
}

#[test]
fn model_rejections_map_to_schema_or_runtime() {
    let (_dir, out) = run_bin(r#"{"model": "goodwin", "parameters": {"params": {"b": -1}}}"#, &[]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let (_dir, out) = run_bin(r#"{"model": "ledger", "parameters": {"amount": 100}}"#, &[]);
    assert!(matches!(out.status.code(), Some(2) | Some(3)), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn seed_override_changes_stochastic_output_only() {
    let cfg = r#"{"model": "goodwin", "parameters": {"figure": 3}, "run": {"paths": 4, "horizon": 2}}"#;
    let a = execute(&parse(cfg, &Overrides::default()).unwrap()).unwrap();
    let b = execute(&parse(cfg, &Overrides { seed: Some(5), ..Default::default() }).unwrap()).unwrap();
    assert_ne!(a.artifacts[0].bytes, b.artifacts[0].bytes);
    let det = r#"{"model": "goodwin", "parameters": {"figure": 2}, "run": {"horizon": 2}}"#;
    let a = execute(&parse(det, &Overrides::default()).unwrap()).unwrap();
    let b = execute(&parse(det, &Overrides { seed: Some(5), ..Default::default() }).unwrap()).unwrap();
    assert_eq!(a.artifacts[0].bytes, b.artifacts[0].bytes);
}

#[test]
fn verify_rejects_unknown_suite() {
    let out = Command::new(BIN).args(["verify", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(BIN).args(["verify", "ledger-56b"]).output().unwrap();
    assert!(out.status.success());
}
