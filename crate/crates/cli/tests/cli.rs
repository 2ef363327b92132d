use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ndsent(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ndsent")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run_config(dir: &Path, body: &str, out: &str, extra: &[&str]) -> Output {
    let cfg = write_config(dir, "config.json", body);
    let out = dir.join(out);
    let mut args = vec!["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    ndsent(&args)
}

fn stderr_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|_| panic!("stderr is JSON: {}", String::from_utf8_lossy(&o.stderr)))
}

#[test]
fn reruns_are_byte_identical_regardless_of_workers() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"{ "system": "bo", "kind": "certify", "partition": "thirds-k1", "n": 64 }"#;
    assert!(run_config(dir.path(), body, "a", &["--workers", "1"]).status.success());
    assert!(run_config(dir.path(), body, "b", &["--workers", "4"]).status.success());
    for f in ["certify.csv", "certify.json"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
}

#[test]
fn report_records_hash_and_expectation_sources() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"{ "system": "bo", "kind": "lipschitz-bound", "n": 512, "output": "lip" }"#;
    let o = run_config(dir.path(), body, "out", &["--verify"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/lip.json")).unwrap()).unwrap();
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(report["csv"], "lip.csv");
    let sources: Vec<&str> =
        report["expectations"].as_array().unwrap().iter().map(|e| e["source"].as_str().unwrap()).collect();
    assert!(sources.contains(&"reference") && sources.contains(&"computed"));
    assert_eq!(report["verification"][0]["pass"], true);
    let csv = std::fs::read_to_string(dir.path().join("out/lip.csv")).unwrap();
    assert!(csv.starts_with("n,value_bits,running_max\r\n"));
    assert_eq!(csv.lines().count(), 513);
}

#[test]
fn unknown_config_field_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config(dir.path(), r#"{ "system": "bo", "kind": "certify", "colour": "red" }"#, "out", &[]);
    assert_eq!(o.status.code(), Some(2));
    let d = stderr_json(&o);
    assert_eq!(d["error"], "parse");
    assert!(d["message"].as_str().unwrap().contains("colour"));
}

#[test]
fn malformed_rational_and_unknown_system_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config(dir.path(), r#"{ "system": "bo", "kind": "certify", "eps_cert": "1/0" }"#, "out", &[]);
    assert_eq!(o.status.code(), Some(2));
    let o = run_config(dir.path(), r#"{ "system": "nope", "kind": "certify" }"#, "out", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"], "usage");
}

#[test]
fn zero_workers_rejected() {
    let o = ndsent(&["--list", "--workers", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"], "usage");
}

#[test]
fn budget_exceeded_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"{ "system": "doubling", "kind": "meas-entropy", "n": 12 }"#;
    let o = run_config(dir.path(), body, "out", &["--budget", "100"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stderr_json(&o)["error"], "budget");
}

#[test]
fn failed_verification_exits_four() {
    // Doubling has one bit of entropy; with thirds the trace at n = 1 is log₂ 3.
    let dir = tempfile::tempdir().unwrap();
    let body = r#"{ "system": "doubling", "kind": "meas-entropy", "partition": "uniform-3", "n": 1 }"#;
    let o = run_config(dir.path(), body, "out", &["--verify"]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(stderr_json(&o)["error"], "verification");
    // Outputs are still written.
    assert!(dir.path().join("out/meas-entropy.json").exists());
}

#[test]
fn missing_expectation_is_a_usage_error() {
    // A system loaded from a file carries no expectations, so --verify has
    // nothing to check against.
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "custom.json", &serde_json::to_string(&system_doc("doubling")).unwrap());
    let body = r#"{ "system": "custom.json", "kind": "topo-cover", "n": 2 }"#;
    assert!(run_config(dir.path(), body, "plain", &[]).status.success());
    let o = run_config(dir.path(), body, "checked", &["--verify"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"], "usage");
}

fn system_doc(id: &str) -> serde_json::Value {
    let v: serde_json::Value = serde_json::from_slice(&ndsent(&["--export", id]).stdout).unwrap();
    v["system"].clone()
}

#[test]
fn emax_demo_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config(dir.path(), r#"{ "system": "digits", "kind": "emax-demo", "n": 12 }"#, "out", &["--verify"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn list_and_export() {
    let o = ndsent(&["--list"]);
    assert!(o.status.success());
    let ids = String::from_utf8(o.stdout).unwrap();
    assert!(ids.lines().any(|l| l == "bo"));
    let doc: serde_json::Value = serde_json::from_slice(&ndsent(&["--export", "bo"]).stdout).unwrap();
    assert_eq!(doc["id"], "bo");
    assert_eq!(ndsent(&["--export", "nope"]).status.code(), Some(2));
}
