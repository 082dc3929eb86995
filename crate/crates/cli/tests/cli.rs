use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn hadamard(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hadamard")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn small_config(dir: &Path, overrides: Value) -> std::path::PathBuf {
    let mut v = json!({
        "dimension": 2, "cutoff_k": 8, "time_steps": 9, "space_points": 36,
        "t_min": -1.0, "t_max": 1.0, "h_expr": "(1+0.2*tanh(t)*cos(x))^2", "m_expr": "1", "u_expr": "0",
        "correction_order": 1, "checks": [], "seed": 11, "out_dir": "out"
    });
    for (k, x) in overrides.as_object().unwrap() {
        v[k] = x.clone();
    }
    let p = dir.join("scenario.json");
    std::fs::write(&p, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    p
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("out/report.json")).unwrap()).unwrap()
}

#[test]
fn flat_massive_validate_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = hadamard(&["validate", "--preset", "flat-massive", "--out-dir", "o"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/report.json")).unwrap()).unwrap();
    assert_eq!(r["passed"], json!(true));
    assert!(r["checks"].as_array().unwrap().len() >= 10);
    assert!(dir.path().join("o/profiles.csv").exists());
}

#[test]
fn breathing_construct_reports_car_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let out = hadamard(&["construct", "--preset", "breathing", "--correction-order", "2", "--out-dir", "o"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/report.json")).unwrap()).unwrap();
    assert_eq!(r["config"]["cutoff_k"], json!(64));
    for c in r["checks"].as_array().unwrap() {
        let name = c["name"].as_str().unwrap();
        if ["state.completeness", "state.lambda_sum", "state.purity"].contains(&name) {
            assert!(c["value"].as_f64().unwrap() < 1e-10, "{c}");
        }
    }
    let csv = std::fs::read_to_string(dir.path().join("o/profiles.csv")).unwrap();
    assert!(csv.starts_with("name,K_prime,block_norm\n"));
    assert!(csv.contains("defect.r2,"));
}

#[test]
fn malformed_expression_exits_2_with_offset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), json!({ "h_expr": "1 + (cos(x)" }));
    let out = hadamard(&["validate", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("/h_expr") && err.contains("byte"), "{err}");
}

#[test]
fn schema_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), json!({ "dimension": 3 }));
    let out = hadamard(&["construct", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/dimension"));
    let out = hadamard(&["construct", "--preset", "nonexistent"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = hadamard(&["construct"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invariant_failure_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    // A Sobolev bound below 1 cannot hold: the order-0 norm of a unitary is 1.
    let cfg = small_config(dir.path(), json!({ "checks": ["sobolev"], "sobolev_bound": 0.5 }));
    let out = hadamard(&["evolve", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stdout));
    let r = report(dir.path());
    assert_eq!(r["passed"], json!(false));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL evolution.sobolev_bound"));
}

#[test]
fn evolve_dumps_kernels() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), json!({ "checks": ["unitarity", "kernels_dump"] }));
    let out = hadamard(&["evolve", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let bytes = std::fs::read(dir.path().join("out/kernels.bin")).unwrap();
    let blocks = hadamard_cli::report::read_kernels(&bytes).unwrap();
    assert_eq!(blocks.len(), 9);
    assert_eq!((blocks[0].1, blocks[0].2), (34, 34));
    // The reference-slice block is the identity.
    let r = &blocks[4];
    assert_eq!(r.3[0], (1.0, 0.0));
    assert_eq!(r.3[1], (0.0, 0.0));
}

#[test]
fn sweep_emits_slope_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), json!({ "correction_order": 0 }));
    let out = hadamard(&["sweep", "--config", cfg.to_str().unwrap(), "--over", "k", "--values", "8,16"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path());
    let rows = r["data"]["slopes"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1]["cutoff_k"], json!(16));
    let out = hadamard(&["sweep", "--config", cfg.to_str().unwrap(), "--over", "r", "--values", "0,1"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let rows = report(dir.path())["data"]["slopes"].as_array().unwrap().clone();
    assert_eq!(rows.iter().map(|r| r["order"].as_u64().unwrap()).collect::<Vec<_>>(), vec![0, 1]);
}

#[test]
fn same_seed_same_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), json!({ "checks": ["feynman"] }));
    let mut docs = vec![];
    for d in ["a", "b"] {
        let out = hadamard(&["feynman", "--config", cfg.to_str().unwrap(), "--out-dir", d], dir.path());
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
        let mut v: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join(d).join("report.json")).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("timestamp");
        docs.push(v);
    }
    assert_eq!(docs[0], docs[1]);
}
