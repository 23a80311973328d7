//! Acceptance run: one PASS/FAIL line per criterion. Every criterion is
//! driven by a configuration under `configs/`, exactly as `membrane run`
//! would execute it.
//!
//! The exit status is nonzero when a criterion outside `KNOWN_FAILURES`
//! fails or a known failure starts passing. With
//! `MEMBRANE_ACCEPTANCE_STRICT=1` every FAIL line is fatal.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use membrane_core::runner::{run_config, RunConfig, RunOptions, RunSummary};

/// Criteria that fail with the faithful construction; README.md explains why.
const KNOWN_FAILURES: [&str; 2] = ["AC8", "AC9"];

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> RunConfig {
    RunConfig::from_file(&configs_dir().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

struct Run {
    summary: RunSummary,
    elapsed: Duration,
}

impl Run {
    fn check(&self, name: &str) -> (bool, String) {
        match self.summary.checks.iter().find(|c| c.name == name) {
            Some(c) => (c.passed, format!("{}: {}", c.name, c.detail)),
            None => (false, format!("{name}: check missing")),
        }
    }
}

fn execute(name: &str, out: &Path, seed: Option<u64>, threads: Option<usize>) -> Result<Run, String> {
    let cfg = load(name);
    let opts = RunOptions {
        out: Some(out.to_path_buf()),
        seed,
        threads,
    };
    let start = Instant::now();
    let summary = run_config(cfg, &opts).map_err(|e| format!("{name}: {e}"))?;
    Ok(Run {
        summary,
        elapsed: start.elapsed(),
    })
}

struct Verdict {
    passed: bool,
    details: Vec<String>,
}

fn verdict(parts: Vec<(bool, String)>) -> Verdict {
    Verdict {
        passed: parts.iter().all(|(ok, _)| *ok),
        details: parts.into_iter().map(|(_, d)| d).collect(),
    }
}

fn csv_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).expect("output directory") {
        let path = entry.expect("entry").path();
        if path.extension().is_some_and(|e| e == "csv") {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            out.insert(name, fs::read(&path).expect("read artifact"));
        }
    }
    out
}

fn main() -> ExitCode {
    let root = tempfile::tempdir().expect("temporary directory");
    let dir = |s: &str| root.path().join(s);
    let mut results: Vec<(&str, &str, Result<Verdict, String>)> = Vec::new();

    let fiber = execute("ac01_fiber.json", &dir("fiber"), None, None);
    results.push((
        "AC1",
        "fiber relaxation agrees with the brute-force oracle",
        fiber.as_ref().map_err(Clone::clone).map(|r| {
            let limit = Duration::from_secs(300);
            verdict(vec![
                r.check("fiber_oracle_agreement"),
                (r.elapsed <= limit, format!("runtime {:.1} s (limit 300 s)", r.elapsed.as_secs_f64())),
            ])
        }),
    ));
    results.push((
        "AC2",
        "rank-deficient inputs give +inf",
        fiber.as_ref().map_err(Clone::clone).map(|r| verdict(vec![r.check("fiber_degenerate_infinite")])),
    ));
    results.push((
        "AC3",
        "constrained relaxation is monotone and converges",
        fiber.as_ref().map_err(Clone::clone).map(|r| {
            verdict(vec![
                r.check("constrained_nonincreasing"),
                r.check("constrained_converges"),
                r.check("constrained_canonical"),
            ])
        }),
    ));

    let env_fiber = execute("ac04_envelope_fiber.json", &dir("envelope_fiber"), None, None);
    let env_dw = execute("ac04_envelope_double_well.json", &dir("envelope_dw"), None, None);
    results.push((
        "AC4",
        "lamination is nonincreasing and relaxes the double well",
        env_fiber.and_then(|a| {
            env_dw.map(|b| {
                verdict(vec![
                    a.check("lamination_nonincreasing"),
                    a.check("lamination_below_density"),
                    b.check("lamination_nonincreasing"),
                    b.check("lamination_final_bound"),
                ])
            })
        }),
    ));

    results.push((
        "AC5",
        "laminate quadrature equals the closed form",
        execute("ac05_micro_identity.json", &dir("identity"), None, None)
            .map(|r| verdict(vec![r.check("laminate_identity")])),
    ));
    results.push((
        "AC6",
        "sigma bounds, area partition and Monte Carlo frequencies",
        execute("ac06_micro_sigma.json", &dir("sigma"), None, None).map(|r| {
            verdict(vec![r.check("sigma_lp_bound"), r.check("region_areas_sum"), r.check("region_monte_carlo")])
        }),
    ));
    results.push((
        "AC7",
        "laminate energy approaches the two-point value like 1/n",
        execute("ac07_micro_limit.json", &dir("limit"), None, None)
            .map(|r| verdict(vec![r.check("limit_slope"), r.check("limit_final")])),
    ));
    results.push((
        "AC8",
        "cell refinement reaches the relaxed target",
        execute("ac08_micro_refinement.json", &dir("refinement"), None, None).map(|r| {
            let limit = Duration::from_secs(600);
            verdict(vec![
                r.check("refinement_final"),
                (r.elapsed <= limit, format!("runtime {:.1} s (limit 600 s)", r.elapsed.as_secs_f64())),
            ])
        }),
    ));
    results.push((
        "AC9",
        "thin-film recovery sequence",
        execute("ac09_film.json", &dir("film"), None, None).map(|r| {
            verdict(vec![
                r.check("film_homogeneous_exact"),
                r.check("film_gap_slope"),
                r.check("film_det_margin"),
                r.check("film_midplane"),
            ])
        }),
    ));
    results.push((
        "AC10",
        "cell estimate ≤ laminate ≤ density ordering",
        execute("ac10_cell.json", &dir("cell"), None, None).map(|r| {
            verdict(vec![r.check("cell_below_density"), r.check("laminate_below_density"), r.check("cell_below_laminate")])
        }),
    ));

    // rerun the cheaper configurations and compare every CSV byte for byte;
    // the second pass uses a different worker count
    let repeat = [
        ("ac01_fiber.json", "fiber"),
        ("ac04_envelope_double_well.json", "envelope_dw"),
        ("ac05_micro_identity.json", "identity"),
        ("ac06_micro_sigma.json", "sigma"),
        ("ac07_micro_limit.json", "limit"),
        ("ac08_micro_refinement.json", "refinement"),
        ("ac09_film.json", "film"),
    ];
    let determinism = (|| -> Result<Verdict, String> {
        let mut parts = Vec::new();
        for (cfg, first) in repeat {
            let again = dir(&format!("{first}_again"));
            execute(cfg, &again, None, Some(2))?;
            let (a, b) = (csv_bytes(&dir(first)), csv_bytes(&again));
            let same = !a.is_empty() && a == b;
            parts.push((same, format!("{cfg}: {} CSV files {}", a.len(), if same { "identical" } else { "differ" })));
        }
        Ok(verdict(parts))
    })();
    results.push(("AC11", "repeated runs give byte-identical CSV artifacts", determinism));

    let strict = std::env::var("MEMBRANE_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let (mut failed, mut fatal) = (0, 0);
    for (id, title, r) in &results {
        let known = KNOWN_FAILURES.contains(id);
        let (passed, details) = match r {
            Ok(v) => (v.passed, v.details.join("; ")),
            Err(e) => (false, format!("error: {e}")),
        };
        let tag = match (passed, known) {
            (false, true) => " (known failure)",
            (true, true) => " (listed as a known failure)",
            _ => "",
        };
        println!("{} {id} {title} [{details}]{tag}", if passed { "PASS" } else { "FAIL" });
        if !passed {
            failed += 1;
        }
        if passed == known || (!passed && strict) {
            fatal += 1;
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if fatal == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
