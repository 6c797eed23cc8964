//! Command-line front end: load a config, run the experiment, write the
//! output directory.
//!
//! Output layout (every file is listed in `manifest.json`):
//!
//! | file                  | content                                               |
//! |-----------------------|-------------------------------------------------------|
//! | `config.resolved.toml`| the validated config with every default filled in     |
//! | `constants.txt`       | theory constants, one `key = value` per line          |
//! | `trials.csv`          | one row per trial                                     |
//! | `summary.csv`         | `t, empirical_tail, theory_bound, wilson_lo, wilson_hi` |
//! | `certification.csv`   | oracle certification rows (when enabled)              |
//! | `traces/seed_<s>.csv` | per-iteration traces (when `output.traces`)           |
//! | `failures.json`       | machine-readable list of failed checks                |
//! | `manifest.json`       | digest, version, seed, timestamps, file inventory     |
//!
//! Exit codes: 0 success, 1 failed criterion, 2 configuration or
//! admissibility failure, 3 runtime error.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::{ConfigError, ExperimentConfig};
use crate::harness::{
    analyse, certify_oracles, run_trials, write_summary_csv, write_trials_csv, CertifyConfig,
    Failure, FailureKind, HarnessError, RunOptions, TrialSummary,
};
use crate::problem::probe_points;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CRITERION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub jobs: Option<usize>,
    pub quiet: bool,
}

#[derive(Debug, Serialize)]
struct Manifest {
    config_digest: String,
    tool_version: &'static str,
    base_seed: u64,
    started_unix: u64,
    finished_unix: u64,
    exit_code: i32,
    files: Vec<String>,
}

struct OutDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutDir {
    fn new(root: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> std::io::Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, bytes)?;
        self.files.push(rel.to_string());
        Ok(())
    }
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn failure(kind: FailureKind, check: &str, message: impl Into<String>) -> Failure {
    Failure {
        kind,
        check: check.to_string(),
        message: message.into(),
    }
}

fn config_failures(err: &ConfigError) -> Vec<Failure> {
    match err {
        ConfigError::Invalid(v) => v
            .iter()
            .map(|m| failure(FailureKind::Hard, "config", m.clone()))
            .collect(),
        other => vec![failure(FailureKind::Hard, "config", other.to_string())],
    }
}

/// Run the experiment described by `config_path`, writing into `out_dir`.
/// Returns the process exit code.
pub fn run(config_path: &Path, out_dir: &Path, ov: &RunOverrides) -> i32 {
    let started = now();
    let mut out = match OutDir::new(out_dir) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("cannot create {}: {e}", out_dir.display());
            return EXIT_RUNTIME;
        }
    };
    let result = run_inner(config_path, &mut out, ov);
    let (code, failures, digest, seed) = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("runtime error: {e}");
            (
                EXIT_RUNTIME,
                vec![failure(FailureKind::Hard, "runtime", e.to_string())],
                String::new(),
                0,
            )
        }
    };
    if !ov.quiet {
        for f in &failures {
            eprintln!("FAIL [{}] {}: {}", kind_str(f.kind), f.check, f.message);
        }
    }
    let json = serde_json::to_vec_pretty(&failures).expect("failures serialise");
    if out.write("failures.json", &json).is_err() {
        return EXIT_RUNTIME;
    }
    let mut files = out.files.clone();
    files.push("manifest.json".to_string());
    let manifest = Manifest {
        config_digest: digest,
        tool_version: env!("CARGO_PKG_VERSION"),
        base_seed: seed,
        started_unix: started,
        finished_unix: now(),
        exit_code: code,
        files,
    };
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serialises");
    if fs::write(out.root.join("manifest.json"), json).is_err() {
        return EXIT_RUNTIME;
    }
    code
}

fn kind_str(k: FailureKind) -> &'static str {
    match k {
        FailureKind::Hard => "hard",
        FailureKind::Statistical => "statistical",
    }
}

type RunOutcome = (i32, Vec<Failure>, String, u64);

fn run_inner(
    config_path: &Path,
    out: &mut OutDir,
    ov: &RunOverrides,
) -> Result<RunOutcome, HarnessError> {
    let cfg = match ExperimentConfig::load(config_path) {
        Ok(c) => c,
        Err(ConfigError::Io { path, source }) => {
            let msg = format!("cannot read {path}: {source}");
            return Ok((EXIT_CONFIG, vec![failure(FailureKind::Hard, "config", msg)], String::new(), 0));
        }
        Err(e) => {
            if !ov.quiet {
                eprintln!("{e}");
            }
            return Ok((EXIT_CONFIG, config_failures(&e), String::new(), 0));
        }
    };
    let mut cfg = cfg;
    if let Some(s) = ov.seed {
        cfg.seed = s;
    }
    if let Some(t) = ov.trials {
        cfg.trials = t;
    }
    let digest = cfg.digest();
    let seed = cfg.seed;
    let exp = match cfg.build() {
        Ok(e) => e,
        Err(e) => {
            if !ov.quiet {
                eprintln!("{e}");
            }
            return Ok((EXIT_CONFIG, config_failures(&e), digest, seed));
        }
    };
    out.write("config.resolved.toml", cfg.to_toml().as_bytes())?;

    let (theory, admissibility) = analyse(&exp);
    let mut constants = match &theory {
        Ok(tc) => tc.report(),
        Err(e) => format!("error = {e}\n"),
    };
    for v in &admissibility {
        constants.push_str(&format!("violation = {v}\n"));
    }
    out.write("constants.txt", constants.as_bytes())?;
    if cfg.theory.enforce && !admissibility.is_empty() {
        if !ov.quiet {
            eprintln!("inadmissible theory constants; no trials run");
        }
        let f = admissibility
            .iter()
            .map(|m| failure(FailureKind::Hard, "admissibility", m.clone()))
            .collect();
        return Ok((EXIT_CONFIG, f, digest, seed));
    }

    let opts = RunOptions {
        jobs: ov.jobs,
        keep_traces: cfg.output.traces,
    };
    let summary = run_trials(&exp, opts)?;
    let mut buf = Vec::new();
    write_trials_csv(&summary, &mut buf)?;
    out.write("trials.csv", &buf)?;
    let mut buf = Vec::new();
    write_summary_csv(&summary, &mut buf)?;
    out.write("summary.csv", &buf)?;
    for t in &summary.trials {
        if let Some(csv) = &t.trace_csv {
            out.write(&format!("traces/seed_{}.csv", t.seed), csv)?;
        }
    }

    let mut failures = summary.failures.clone();
    if cfg.certification.enabled {
        let probes = probe_points(&exp.problem.x0, cfg.certification.probes, cfg.seed);
        let report = certify_oracles(
            &exp.problem,
            &exp.zeroth,
            &exp.first,
            &probes,
            &CertifyConfig {
                queries: cfg.certification.queries,
                alpha: cfg.algorithm.alpha0,
                seed: cfg.seed,
                ..CertifyConfig::default()
            },
        );
        let mut buf = Vec::new();
        report.write_csv(&mut buf)?;
        out.write("certification.csv", &buf)?;
        if cfg.certification.required {
            for r in report.rows.iter().filter(|r| !r.pass) {
                failures.push(failure(
                    FailureKind::Statistical,
                    "certification",
                    format!(
                        "probe {} {}: statistic {} vs threshold {}",
                        r.probe, r.test, r.statistic, r.threshold
                    ),
                ));
            }
        }
    }

    if !ov.quiet {
        print_summary(&summary);
    }
    let code = if failures.is_empty() { EXIT_OK } else { EXIT_CRITERION };
    Ok((code, failures, digest, seed))
}

fn print_summary(s: &TrialSummary) {
    let n = s.trials.len();
    let censored = s.trials.iter().filter(|t| t.t_eps.is_none()).count();
    println!("trials: {n}  censored: {censored}");
    if let Some(tc) = &s.theory {
        println!(
            "p = {:.6}  R = {:.3}  t_min = {}",
            tc.p,
            tc.r_offset,
            tc.t_min.map_or("none".to_string(), |t| t.to_string())
        );
    }
    println!("{:>10} {:>12} {:>12} {:>10} {:>10}", "t", "empirical", "bound", "lo", "hi");
    for r in &s.checkpoints {
        println!(
            "{:>10} {:>12.6} {:>12.6} {:>10.6} {:>10.6}",
            r.t, r.empirical_tail, r.theory_bound, r.wilson_lo, r.wilson_hi
        );
    }
    let p = &s.passes;
    println!(
        "paths passing: lemma2 {}/{n}  corollary1 {}/{n}  lemma3 {}/{n}  lemma4 {}/{n}",
        p.lemma2, p.corollary1, p.lemma3, p.lemma4
    );
}
