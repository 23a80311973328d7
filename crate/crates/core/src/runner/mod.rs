//! Configuration-driven experiments and their artifacts.

mod config;
mod experiments;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

pub use config::*;
pub use experiments::{loglog_slope, Check, Outcome, Table};

use crate::error::{Error, Result};

/// Command-line overrides applied on top of the configuration file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArtifactRecord {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub kind: ExperimentKind,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub out_dir: PathBuf,
    pub artifacts: Vec<ArtifactRecord>,
    pub config_sha256: String,
}

/// Process exit status for a finished or failed run.
pub fn exit_code(result: &Result<RunSummary>) -> i32 {
    match result {
        Ok(s) if s.passed => 0,
        Ok(_) => 1,
        Err(Error::Config { .. }) => 2,
        Err(_) => 1,
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// The configuration that determines the numbers: overrides applied,
/// execution-only fields cleared.
pub fn effective_config(mut cfg: RunConfig, opts: &RunOptions) -> RunConfig {
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    cfg.threads = None;
    cfg.output_dir = None;
    cfg
}

pub fn run_file(path: &Path, opts: &RunOptions) -> Result<RunSummary> {
    let cfg = RunConfig::from_file(path)?;
    run_config(cfg, opts)
}

/// Runs the experiment and writes `*.csv`, `report.json`, `summary.txt` and
/// `manifest.json` into the output directory.
pub fn run_config(cfg: RunConfig, opts: &RunOptions) -> Result<RunSummary> {
    cfg.validate()?;
    if opts.threads == Some(0) {
        return Err(Error::config("--threads", "must be at least 1"));
    }
    let threads = opts
        .threads
        .or(cfg.threads)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let out_dir = opts
        .out
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(cfg.kind.as_str()));
    let cfg = effective_config(cfg, opts);
    let canonical = cfg.to_canonical_json();
    let config_sha256 = sha256_hex(canonical.as_bytes());

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::ResourceLimit(format!("cannot start {threads} worker threads: {e}")))?;
    let w = cfg.model.build()?;
    let ctx = experiments::Ctx { cfg: &cfg, w, pool: &pool };
    let outcome = experiments::run(&ctx)?;
    let passed = outcome.passed();

    fs::create_dir_all(&out_dir)?;
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    for t in &outcome.tables {
        files.push((format!("{}.csv", t.name), t.to_csv()?.into_bytes()));
    }
    for (name, text) in &outcome.texts {
        files.push((name.clone(), text.clone().into_bytes()));
    }
    let report = json!({
        "kind": cfg.kind.as_str(),
        "seed": cfg.seed,
        "passed": passed,
        "checks": outcome.checks,
        "data": outcome.data,
        "notes": outcome.notes,
    });
    files.push(("report.json".into(), format!("{}\n", serde_json::to_string_pretty(&report)?).into_bytes()));
    files.push(("summary.txt".into(), summary_text(&cfg, &outcome).into_bytes()));

    let mut artifacts = Vec::with_capacity(files.len());
    for (name, bytes) in &files {
        fs::write(out_dir.join(name), bytes)?;
        artifacts.push(ArtifactRecord {
            file: name.clone(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
    }
    emit_manifest(&out_dir, &cfg, &config_sha256, &artifacts)?;

    Ok(RunSummary {
        kind: cfg.kind,
        passed,
        checks: outcome.checks,
        out_dir,
        artifacts,
        config_sha256,
    })
}

fn summary_text(cfg: &RunConfig, outcome: &Outcome) -> String {
    let mut s = format!("membrane {} run, seed {}\n", cfg.kind.as_str(), cfg.seed);
    for c in &outcome.checks {
        let _ = writeln!(s, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed = outcome.checks.iter().filter(|c| !c.passed).count();
    let _ = writeln!(s, "{} of {} checks passed", outcome.checks.len() - failed, outcome.checks.len());
    for n in &outcome.notes {
        let _ = writeln!(s, "note: {n}");
    }
    s
}

/// Writes `manifest.json`: tool version, seed, hash of the effective
/// configuration and the hash of every other artifact.
pub fn emit_manifest(out_dir: &Path, cfg: &RunConfig, config_sha256: &str, artifacts: &[ArtifactRecord]) -> Result<()> {
    let manifest = json!({
        "tool": "membrane",
        "version": env!("CARGO_PKG_VERSION"),
        "kind": cfg.kind.as_str(),
        "seed": cfg.seed,
        "config_sha256": config_sha256,
        "config": cfg,
        "artifacts": artifacts,
    });
    fs::write(out_dir.join("manifest.json"), format!("{}\n", serde_json::to_string_pretty(&manifest)?))?;
    Ok(())
}
