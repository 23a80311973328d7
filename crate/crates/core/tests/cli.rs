use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn membrane() -> Command {
    Command::new(env!("CARGO_BIN_EXE_membrane"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, text).unwrap();
    p
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn passing_run_exits_zero_and_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let status = membrane()
        .args(["run", config("ac05_micro_identity.json").to_str().unwrap(), "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    for f in ["identity.csv", "report.json", "summary.txt", "manifest.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["passed"], Value::Bool(true));
}

#[test]
fn failing_assertion_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    // an unreachable bound on the relaxed double well
    let cfg = write_config(
        tmp.path(),
        r#"{"kind": "envelope", "envelope": {
            "density": {"kind": "squared_norm"},
            "points": {"explicit": [[[1, 0], [0, 1], [0, 0]]], "samples": 0},
            "depth": 1, "max_final": 0.5}}"#,
    );
    let out = tmp.path().join("out");
    let output = membrane()
        .args(["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stdout).contains("FAIL lamination_final_bound"));
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("FAIL lamination_final_bound"));
}

#[test]
fn schema_violation_exits_two_with_field_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"kind": "fiber", "model": {"p": 0.5}}"#);
    let output = membrane().args(["run", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("model.p"), "{err}");

    let cfg = write_config(tmp.path(), r#"{"kind": "micro", "micro": {"identity": {"n_values": [4, 2]}}}"#);
    let output = membrane().args(["run", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("micro.identity.n_values[1]"));

    let output = membrane().args(["run", "/nonexistent/config.json"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));

    let output = membrane().args(["run", config("ac01_fiber.json").to_str().unwrap(), "--threads", "0"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn manifest_lists_every_artifact_with_its_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let status = membrane()
        .args(["run", config("ac09_film.json").to_str().unwrap(), "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.code().is_some());
    let manifest = read_json(&out.join("manifest.json"));
    let listed: Vec<String> = manifest["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["file"].as_str().unwrap().to_string())
        .collect();
    let mut on_disk: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n != "manifest.json")
        .collect();
    on_disk.sort();
    let mut sorted = listed.clone();
    sorted.sort();
    assert_eq!(sorted, on_disk);
    for a in manifest["artifacts"].as_array().unwrap() {
        let bytes = fs::read(out.join(a["file"].as_str().unwrap())).unwrap();
        assert_eq!(a["bytes"].as_u64().unwrap(), bytes.len() as u64);
        assert_eq!(a["sha256"].as_str().unwrap().len(), 64);
    }
    assert_eq!(manifest["tool"], "membrane");
    assert_eq!(manifest["seed"], 0);
}

#[test]
fn seed_override_changes_the_config_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |seed: &str, dir: &str| {
        let out = tmp.path().join(dir);
        let status = membrane()
            .args(["run", config("ac06_micro_sigma.json").to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", seed])
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
        read_json(&out.join("manifest.json"))
    };
    let a = run("1", "a");
    let b = run("1", "b");
    let c = run("2", "c");
    assert_eq!(a["config_sha256"], b["config_sha256"]);
    assert_eq!(a["artifacts"], b["artifacts"]);
    assert_ne!(a["config_sha256"], c["config_sha256"]);
    assert_eq!(c["seed"], 2);
    // the Monte Carlo table depends on the seed
    assert_ne!(
        fs::read(tmp.path().join("a/monte_carlo.csv")).unwrap(),
        fs::read(tmp.path().join("c/monte_carlo.csv")).unwrap()
    );
}

#[test]
fn published_schema_is_current() {
    let output = membrane().arg("schema").output().unwrap();
    assert_eq!(output.status.code(), Some(0));
    let published = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/config-schema.json");
    let on_disk = fs::read_to_string(&published).unwrap_or_default();
    assert!(
        on_disk == String::from_utf8(output.stdout).unwrap(),
        "docs/config-schema.json is stale; regenerate with `membrane schema > docs/config-schema.json`"
    );
}
