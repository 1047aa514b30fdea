use std::path::Path;
use std::process::{Command, Output};

use holojcas::output::SWEEP_HEADER;

fn holo(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_holo-jcas"))
        .args(args)
        .current_dir(dir)
        .env_remove("HOLO_JCAS_THREADS")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    std::fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

#[test]
fn convergence_trace_with_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = holo(&["convergence", "--out", "trace.csv"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "iteration,rate,crb_theta_db,crb_phi_db,objective,tx_power"
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert!(!rows.is_empty() && rows.len() <= 100);
    assert!(
        rows.iter().any(|r| r[1] != rows[0][1]),
        "rate column is constant"
    );
    for r in &rows {
        assert!((r[5] - 1.0).abs() < 1e-9);
    }
}

#[test]
fn convergence_json_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"elements": 16, "rf_chains": 2, "format": "json"}"#,
    );
    let out = holo(
        &["convergence", "--config", &cfg, "--out", "t.json"],
        dir.path(),
    );
    assert!(out.status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("t.json")).unwrap()).unwrap();
    assert!(!doc["rows"].as_array().unwrap().is_empty());
    assert!(doc["converged"].is_boolean());
}

#[test]
fn malformed_config_leaves_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", r#"{"elements": 36,"#);
    let out = holo(
        &["convergence", "--config", &cfg, "--out", "trace.csv"],
        dir.path(),
    );
    assert!(!out.status.success());
    assert!(!dir.path().join("trace.csv").exists());
    let cfg = write(dir.path(), "typo.json", r#"{"rf_chain": 3}"#);
    let out = holo(&["sweep", "--config", &cfg, "--out", "s.csv"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown field"));
    assert!(!dir.path().join("s.csv").exists());
}

#[test]
fn non_square_aperture_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"elements": 35}"#);
    let out = holo(
        &["convergence", "--config", &cfg, "--out", "t.csv"],
        dir.path(),
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("perfect square"));
    let cfg = write(
        dir.path(),
        "s.json",
        r#"{"sweep": {"axis": "aperture", "values": [36, 35]}}"#,
    );
    let out = holo(&["sweep", "--config", &cfg, "--out", "s.csv"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("perfect square"));
    assert!(!dir.path().join("s.csv").exists());
}

#[test]
fn sweep_csv_layout_and_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.json",
        r#"{"elements": 16, "rf_chains": 2, "n_trials": 50, "format": "json",
            "sweep": {"axis": "rf_chains", "values": [2, 3]}}"#,
    );
    let out = holo(
        &[
            "sweep", "--config", &cfg, "--trials", "2", "--format", "csv", "--seed", "9", "--out",
            "s.csv",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], SWEEP_HEADER.join(","));
    assert_eq!(
        lines[0],
        "axis_value,scheme,mean_rate,mean_crb_theta_lin,mean_crb_phi_lin,mean_crb_theta_db,\
         mean_crb_phi_db,mean_crb_theta_db_alt,mean_crb_phi_db_alt,n_ok,n_failed"
    );
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("2,proposed,"));
    assert!(lines[2].starts_with("2,benchmark,"));
    assert!(lines[3].starts_with("3,proposed,"));
    assert!(lines[1].ends_with(",2,0"));

    let other = holo(
        &[
            "sweep", "--config", &cfg, "--trials", "2", "--format", "csv", "--seed", "10", "--out",
            "t.csv",
        ],
        dir.path(),
    );
    assert!(other.status.success());
    assert_ne!(
        text,
        std::fs::read_to_string(dir.path().join("t.csv")).unwrap()
    );
}

#[test]
fn sweep_json_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.json",
        r#"{"elements": 16, "rf_chains": 2, "n_trials": 2,
            "sweep": {"axis": "snr_db", "values": [0]}, "format": "json"}"#,
    );
    let out = holo(&["sweep", "--config", &cfg, "--out", "s.json"], dir.path());
    assert!(out.status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.json")).unwrap()).unwrap();
    assert_eq!(doc["axis"], "snr_db");
    assert_eq!(doc["points"].as_array().unwrap().len(), 2);
    assert_eq!(doc["points"][1]["scheme"], "benchmark");
}

#[test]
fn bad_thread_cap_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.json",
        r#"{"elements": 16, "rf_chains": 2, "n_trials": 1, "sweep": {"axis": "snr_db", "values": [0]}}"#,
    );
    let out = Command::new(env!("CARGO_BIN_EXE_holo-jcas"))
        .args(["sweep", "--config", &cfg, "--out", "s.csv"])
        .current_dir(dir.path())
        .env("HOLO_JCAS_THREADS", "zero")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("HOLO_JCAS_THREADS"));
}

#[test]
fn validate_passes_and_detects_injected_fault() {
    let dir = tempfile::tempdir().unwrap();
    let start = std::time::Instant::now();
    let clean = holo(&["validate"], dir.path());
    assert!(
        clean.status.success(),
        "{}",
        String::from_utf8_lossy(&clean.stdout)
    );
    assert!(start.elapsed().as_secs_f64() < 60.0);
    let stdout = String::from_utf8_lossy(&clean.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 7);

    let broken = holo(
        &["validate", "--inject-fault", "flip-theta-derivative"],
        dir.path(),
    );
    assert!(!broken.status.success());
    let stdout = String::from_utf8_lossy(&broken.stdout);
    assert!(
        stdout
            .lines()
            .any(|l| l.starts_with("FAIL steering derivatives")),
        "{stdout}"
    );
}

#[test]
fn shipped_recipes_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let file = holojcas::config::RunConfigFile::load(&path).unwrap();
        file.validate_sweep()
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= 7);
}
