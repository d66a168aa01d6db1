//! Black-box tests of the command-line binary: output files, determinism
//! across worker counts, and exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_repscen"))
}

fn write_spec(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn run_ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

const BAND_SPEC: &str = r#"{
    "eps_low": 0.19, "eps_high": 0.21,
    "p_prior": 0.9, "p_post": 0.95,
    "m": 100000,
    "support": {"zeta_low": 2, "zeta_high": 5},
    "bound_mode": "guaranteed"
}"#;

#[test]
fn design_writes_expected_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "spec.json", BAND_SPEC);
    let out = bin()
        .args(["--out", dir.path().to_str().unwrap(), "design", "--spec", &spec])
        .output()
        .unwrap();
    run_ok(&out);
    let summary_path = String::from_utf8(out.stdout).unwrap();
    assert!(summary_path.trim().ends_with("design_summary.json"));

    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("design.json")).unwrap())
            .unwrap();
    assert_eq!(doc["r_star"], 15);
    assert_eq!(doc["n_trials"], 84);
}

#[test]
fn run_output_is_deterministic_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        "run.json",
        r#"{
            "problem": "quantile1d",
            "designs": [{
                "eps_low": 0.15, "eps_high": 0.25,
                "p_prior": 0.9, "p_post": 0.95,
                "m": 500,
                "support": {"zeta_low": 1, "zeta_high": 1},
                "bound_mode": "guaranteed"
            }]
        }"#,
    );
    let mut outputs = Vec::new();
    for workers in ["1", "2"] {
        let sub = dir.path().join(format!("w{workers}"));
        let out = bin()
            .args([
                "--seed", "7",
                "--workers", workers,
                "--out", sub.to_str().unwrap(),
                "run", "--spec", &spec,
            ])
            .output()
            .unwrap();
        run_ok(&out);
        outputs.push(std::fs::read(sub.join("outcome.json")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1], "outcome differs across worker counts");
    let doc: serde_json::Value = serde_json::from_slice(&outputs[0]).unwrap();
    assert!(doc["q_hat"][0].as_u64().unwrap() <= 500);
}

#[test]
fn bounds_writes_curve_csv() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        "bounds.json",
        r#"{"m": 500, "q": 375, "support": {"zeta_low": 1, "zeta_high": 10}, "points": 101}"#,
    );
    let out = bin()
        .args(["--out", dir.path().to_str().unwrap(), "bounds", "--spec", &spec])
        .output()
        .unwrap();
    run_ok(&out);
    let csv = std::fs::read_to_string(dir.path().join("bound_curves.csv")).unwrap();
    assert!(csv.starts_with("eps,"));
    assert_eq!(csv.lines().count(), 102);
}

#[test]
fn infeasible_design_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        "bad.json",
        r#"{
            "eps_low": 0.19, "eps_high": 0.21,
            "p_prior": 0.9, "p_post": 0.95,
            "m": 500,
            "support": {"zeta_low": 1, "zeta_high": 3},
            "bound_mode": "guaranteed"
        }"#,
    );
    let out = bin()
        .args(["--out", dir.path().to_str().unwrap(), "design", "--spec", &spec])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn usage_errors_exit_two() {
    let out = bin().arg("--definitely-not-a-flag").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin()
        .args(["--workers", "0", "design", "--spec", "/nonexistent.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reproduce_fig2_reports_all_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["--out", dir.path().to_str().unwrap(), "reproduce", "--which", "fig2"])
        .output()
        .unwrap();
    run_ok(&out);
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(String::from_utf8(out.stdout).unwrap().trim()).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["all_pass"], true);
}
