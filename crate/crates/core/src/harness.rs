//! Many-trial experiment driver.
//!
//! [`run_trials`] executes the line search once per seed, analyses every
//! path, checks the deterministic path lemmas and compares the empirical
//! distribution of `T_ε` with the theoretical lower bound.
//! [`certify_oracles`] tests the oracle contracts statistically.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::aloe::{aloe_run, aloe_run_with_schedule, AloeError};
use crate::config::{EpsFSource, Experiment};
use crate::estimator::EpochSchedule;
use crate::instrumentation::{AuditContext, PathReport, StoppingSpec};
use crate::oracle::{FirstOracle, NoiseMode, ZerothOracle};
use crate::problem::{ProblemInstance, Vector};
use crate::rng::{query_stream, Purpose};
use crate::stats::{wilson99, wilson99_upper, Z_ONE_SIDED_99};
use crate::theory::{self, TheoryConstants, TheoryError};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("theory constants are inadmissible:\n  - {}", .0.join("\n  - "))]
    Inadmissible(Vec<String>),
    #[error("trial with seed {seed} failed: {source}")]
    Trial { seed: u64, source: AloeError },
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Outcome of the deterministic path checks on one trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LemmaVerdicts {
    /// `ΣUΘ ≥ ΣU(1−Θ) − d` on every prefix up to `T_ε`.
    pub lemma2: bool,
    /// `ΣUΘ ≥ ½(ΣU − d)` on every prefix up to `T_ε`.
    pub corollary1: bool,
    /// `Σ(1−U)I ≤ Σ(1−U)(1−I)` on every prefix before `T_ε`.
    pub lemma3: bool,
    /// No prefix before `T_ε` has many true but few good iterations.
    pub lemma4: bool,
}

impl LemmaVerdicts {
    pub fn all(&self) -> bool {
        self.lemma2 && self.corollary1 && self.lemma3 && self.lemma4
    }
}

/// Values of `p̂` checked by the counting lemma.
pub const LEMMA4_GRID: [f64; 9] = [0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95];

/// Check the counting lemmas on indicator sequences `I` (true), `Θ`
/// (successful) and `U` (large) of equal length.
pub fn verify_path_lemmas(
    true_flags: &[bool],
    success: &[bool],
    large: &[bool],
    t_eps: Option<usize>,
    d: f64,
) -> LemmaVerdicts {
    let n = true_flags.len();
    assert!(success.len() == n && large.len() == n, "flag sequences differ in length");
    let stop = t_eps.unwrap_or(usize::MAX);
    let tol = 1e-9;
    let mut v = LemmaVerdicts {
        lemma2: true,
        corollary1: true,
        lemma3: true,
        lemma4: true,
    };
    let (mut u_s, mut u_f, mut nu_i, mut nu_ni, mut i_all, mut good) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for t in 1..=n {
        let k = t - 1;
        let (i, th, u) = (true_flags[k], success[k], large[k]);
        if u {
            if th {
                u_s += 1.0;
            } else {
                u_f += 1.0;
            }
        } else if i {
            nu_i += 1.0;
        } else {
            nu_ni += 1.0;
        }
        if i {
            i_all += 1.0;
        }
        if u && th && i {
            good += 1.0;
        }
        if t > stop {
            break;
        }
        if u_s < u_f - d - tol {
            v.lemma2 = false;
        }
        if u_s < 0.5 * (u_s + u_f - d) - tol {
            v.corollary1 = false;
        }
        if t < stop {
            if nu_i > nu_ni {
                v.lemma3 = false;
            }
            let tf = t as f64;
            for p_hat in LEMMA4_GRID {
                if i_all >= p_hat * tf && good < (p_hat - 0.5) * tf - 0.5 * d - tol {
                    v.lemma4 = false;
                }
            }
        }
    }
    v
}

/// `P̂(T_ε ≤ t)`; censored samples count as larger than every `t`.
pub fn empirical_tail(samples: &[Option<usize>], t: u64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let hits = samples
        .iter()
        .filter(|s| s.is_some_and(|v| v as u64 <= t))
        .count();
    hits as f64 / samples.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub seed: u64,
    pub t_eps: Option<usize>,
    pub n_iters: usize,
    pub n_true: usize,
    pub frac_true: f64,
    pub frac_success: f64,
    pub verdicts: LemmaVerdicts,
    pub armijo_consistent: bool,
    pub progress_ok: bool,
    pub damage_ok: bool,
    pub small_true_success_ok: bool,
    pub threshold: f64,
    pub threshold_fallback: bool,
    pub d: f64,
    pub final_gap: f64,
    pub final_grad_norm: f64,
    pub eps_f_estimates: Vec<f64>,
    #[serde(skip)]
    pub trace_csv: Option<Vec<u8>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckpointRow {
    pub t: u64,
    pub empirical_tail: f64,
    pub theory_bound: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    /// A deterministic property failed on some path.
    Hard,
    /// A statistical comparison failed at 99 % confidence.
    Statistical,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub kind: FailureKind,
    pub check: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PassCounts {
    pub lemma2: usize,
    pub corollary1: usize,
    pub lemma3: usize,
    pub lemma4: usize,
    pub armijo_consistent: usize,
    pub progress: usize,
    pub damage: usize,
    pub small_true_success: usize,
    pub threshold_fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSummary {
    pub trials: Vec<TrialResult>,
    pub checkpoints: Vec<CheckpointRow>,
    pub theory: Option<TheoryConstants>,
    pub admissibility: Vec<String>,
    pub passes: PassCounts,
    pub true_count: usize,
    pub iteration_count: usize,
    pub failures: Vec<Failure>,
}

impl TrialSummary {
    pub fn admissible(&self) -> bool {
        self.theory.is_some() && self.admissibility.is_empty()
    }

    pub fn stopping_samples(&self) -> Vec<Option<usize>> {
        self.trials.iter().map(|t| t.t_eps).collect()
    }

    pub fn has_hard_failure(&self) -> bool {
        self.failures.iter().any(|f| f.kind == FailureKind::Hard)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the available parallelism.
    pub jobs: Option<usize>,
    pub keep_traces: bool,
}

/// Theory constants and the admissibility verdict for an experiment.
pub fn analyse(exp: &Experiment) -> (Result<TheoryConstants, TheoryError>, Vec<String>) {
    let inputs = exp.theory_inputs();
    let mut inputs_eps1 = inputs;
    let tc = TheoryConstants::compute(&inputs, &exp.config.theory.choices());
    match tc {
        Ok(tc) => {
            inputs_eps1.eps1 = exp.stopping_spec(tc.eta).eps1;
            let mut tc = tc;
            tc.eps1 = inputs_eps1.eps1;
            let v = tc.admissibility_violations(&inputs_eps1);
            (Ok(tc), v)
        }
        Err(e) => {
            let msg = e.to_string();
            (Err(e), vec![msg])
        }
    }
}

/// Step threshold, `η` and `h(τ)` used for auditing when the theory
/// constants are unavailable.
fn fallback_context(exp: &Experiment) -> (f64, f64) {
    let p = &exp.params;
    let eta = theory::eta_grid(p.theta).next().expect("grid is nonempty");
    let bar = theory::bar_alpha(p.theta, exp.problem.lipschitz, exp.first.spec.kappa, eta)
        .unwrap_or(p.alpha0);
    (theory::grid_snap(bar, p.alpha0, p.gamma), eta)
}

fn default_checkpoints(theory: Option<&TheoryConstants>, budget: usize) -> Vec<u64> {
    let budget = budget as u64;
    match theory.and_then(|t| t.t_min) {
        Some(tm) => {
            let v: Vec<u64> = [tm, 2 * tm, 4 * tm]
                .into_iter()
                .filter(|&t| t <= budget)
                .collect();
            if v.is_empty() {
                vec![budget]
            } else {
                v
            }
        }
        None => vec![budget],
    }
}

fn run_one(
    exp: &Experiment,
    seed: u64,
    spec: &StoppingSpec,
    ctx: &AuditContext,
    keep_trace: bool,
) -> Result<TrialResult, AloeError> {
    let (trace, estimates) = match exp.config.algorithm.eps_f_source {
        EpsFSource::Declared => (
            aloe_run(&exp.problem, &exp.zeroth, &exp.first, &exp.params, seed)?,
            Vec::new(),
        ),
        EpsFSource::Estimated => {
            let mut sched = EpochSchedule::new(
                &exp.zeroth,
                &exp.problem,
                exp.config.estimator_config(),
                seed,
                exp.config.algorithm.eps_f_multiplier,
            );
            let tr = aloe_run_with_schedule(
                &exp.problem,
                &exp.zeroth,
                &exp.first,
                &exp.params,
                seed,
                |k, x| sched.eps_f_at(k, x),
            )?;
            (tr, sched.history)
        }
    };
    let report = PathReport::build(&trace, &exp.problem, spec, ctx);
    let verdicts = verify_path_lemmas(
        &report.true_flags,
        &report.success_flags,
        &report.large_flags,
        report.t_eps,
        report.d,
    );
    let trace_csv = if keep_trace {
        let mut buf = Vec::new();
        trace.write_csv(&mut buf)?;
        Some(buf)
    } else {
        None
    };
    Ok(TrialResult {
        seed,
        t_eps: report.t_eps,
        n_iters: report.budget,
        n_true: report.true_flags.iter().filter(|&&b| b).count(),
        frac_true: report.frac_true(),
        frac_success: report.frac_success(),
        verdicts,
        armijo_consistent: report.armijo_consistent,
        progress_ok: report.progress_ok,
        damage_ok: report.damage_ok,
        small_true_success_ok: report.small_true_success_ok,
        threshold: report.threshold,
        threshold_fallback: report.threshold_fallback,
        d: report.d,
        final_gap: trace.final_phi - exp.problem.phi_star,
        final_grad_norm: trace.final_grad_norm,
        eps_f_estimates: estimates,
        trace_csv,
    })
}

/// Run `config.trials` independent trials with seeds `seed + i`.
///
/// Refuses to run when `theory.enforce` is set and the constants are
/// inadmissible. The result does not depend on the number of workers.
pub fn run_trials(exp: &Experiment, opts: RunOptions) -> Result<TrialSummary, HarnessError> {
    let cfg = &exp.config;
    let (theory, admissibility) = analyse(exp);
    if cfg.theory.enforce && !admissibility.is_empty() {
        return Err(HarnessError::Inadmissible(admissibility));
    }
    let theory = theory.ok();
    let (tau, eta, h) = match &theory {
        Some(tc) => (tc.bar_alpha_grid, tc.eta, Some(tc.h_at_bar)),
        None => {
            let (tau, eta) = fallback_context(exp);
            (tau, eta, None)
        }
    };
    let admissible = theory.is_some() && admissibility.is_empty();
    let spec = exp.stopping_spec(eta);
    let ctx = AuditContext {
        eps_g: exp.first.spec.eps_g,
        kappa: exp.first.spec.kappa,
        threshold: tau,
        alpha0: exp.params.alpha0,
        gamma: exp.params.gamma,
        h_at_threshold: if admissible { h } else { None },
    };

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = opts.jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder.build().map_err(|e| HarnessError::Pool(e.to_string()))?;
    let trials: Vec<TrialResult> = pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|i| {
                let seed = cfg.seed.wrapping_add(i as u64);
                run_one(exp, seed, &spec, &ctx, opts.keep_traces)
                    .map_err(|source| HarnessError::Trial { seed, source })
            })
            .collect::<Result<Vec<_>, _>>()
    })?;

    let samples: Vec<Option<usize>> = trials.iter().map(|t| t.t_eps).collect();
    let checkpoints = if cfg.checkpoints.is_empty() {
        default_checkpoints(theory.as_ref(), cfg.budget)
    } else {
        cfg.checkpoints.clone()
    };
    let n = trials.len() as u64;
    let rows: Vec<CheckpointRow> = checkpoints
        .iter()
        .map(|&t| {
            let hits = samples.iter().filter(|s| s.is_some_and(|v| v as u64 <= t)).count() as u64;
            let (lo, hi) = wilson99(hits, n);
            CheckpointRow {
                t,
                empirical_tail: empirical_tail(&samples, t),
                theory_bound: match (&theory, admissible) {
                    (Some(tc), true) => tc.tail_bound(t),
                    _ => 0.0,
                },
                wilson_lo: lo,
                wilson_hi: hi,
            }
        })
        .collect();

    let mut passes = PassCounts::default();
    for t in &trials {
        passes.lemma2 += t.verdicts.lemma2 as usize;
        passes.corollary1 += t.verdicts.corollary1 as usize;
        passes.lemma3 += t.verdicts.lemma3 as usize;
        passes.lemma4 += t.verdicts.lemma4 as usize;
        passes.armijo_consistent += t.armijo_consistent as usize;
        passes.progress += t.progress_ok as usize;
        passes.damage += t.damage_ok as usize;
        passes.small_true_success += t.small_true_success_ok as usize;
        passes.threshold_fallbacks += t.threshold_fallback as usize;
    }
    let true_count: usize = trials.iter().map(|t| t.n_true).sum();
    let iteration_count: usize = trials.iter().map(|t| t.n_iters).sum();

    let mut failures = Vec::new();
    let total = trials.len();
    let mut hard = |check: &str, passed: usize| {
        if passed < total {
            failures.push(Failure {
                kind: FailureKind::Hard,
                check: check.to_string(),
                message: format!("{} of {total} paths violate {check}", total - passed),
            });
        }
    };
    hard("lemma2", passes.lemma2);
    hard("corollary1", passes.corollary1);
    hard("armijo_consistent", passes.armijo_consistent);
    hard("damage_bound", passes.damage);
    if admissible {
        hard("lemma3", passes.lemma3);
        hard("lemma4", passes.lemma4);
        hard("progress_bound", passes.progress);
        hard("small_true_success", passes.small_true_success);
    }
    if let (Some(tc), true) = (&theory, admissible) {
        for r in &rows {
            if tc.t_min.is_some_and(|tm| r.t >= tm) && r.wilson_hi < r.theory_bound {
                failures.push(Failure {
                    kind: FailureKind::Statistical,
                    check: "tail_dominance".to_string(),
                    message: format!(
                        "at t = {}: empirical {} (upper {}) below bound {}",
                        r.t, r.empirical_tail, r.wilson_hi, r.theory_bound
                    ),
                });
            }
        }
        let hi = wilson99(true_count as u64, iteration_count as u64).1;
        if hi < tc.p {
            failures.push(Failure {
                kind: FailureKind::Statistical,
                check: "true_fraction".to_string(),
                message: format!(
                    "fraction of true iterations {} (upper {hi}) below p = {}",
                    true_count as f64 / iteration_count.max(1) as f64,
                    tc.p
                ),
            });
        }
    }

    Ok(TrialSummary {
        trials,
        checkpoints: rows,
        theory,
        admissibility,
        passes,
        true_count,
        iteration_count,
        failures,
    })
}

pub fn write_summary_csv<W: Write>(summary: &TrialSummary, writer: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "empirical_tail", "theory_bound", "wilson_lo", "wilson_hi"])?;
    for r in &summary.checkpoints {
        w.write_record([
            r.t.to_string(),
            r.empirical_tail.to_string(),
            r.theory_bound.to_string(),
            r.wilson_lo.to_string(),
            r.wilson_hi.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trials_csv<W: Write>(summary: &TrialSummary, writer: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "seed",
        "T_eps",
        "censored",
        "frac_true",
        "frac_success",
        "lemma2_ok",
        "lemma3_ok",
        "lemma4_ok",
        "corollary1_ok",
        "threshold",
        "threshold_fallback",
        "d",
        "final_gap",
        "final_grad_norm",
        "eps_f_estimates",
    ])?;
    let b = |v: bool| (v as u8).to_string();
    for t in &summary.trials {
        let est: Vec<String> = t.eps_f_estimates.iter().map(|v| v.to_string()).collect();
        w.write_record([
            t.seed.to_string(),
            t.t_eps.map_or(String::new(), |v| v.to_string()),
            b(t.t_eps.is_none()),
            t.frac_true.to_string(),
            t.frac_success.to_string(),
            b(t.verdicts.lemma2),
            b(t.verdicts.lemma3),
            b(t.verdicts.lemma4),
            b(t.verdicts.corollary1),
            t.threshold.to_string(),
            b(t.threshold_fallback),
            t.d.to_string(),
            t.final_gap.to_string(),
            t.final_grad_norm.to_string(),
            est.join(";"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Settings of [`certify_oracles`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyConfig {
    pub queries: usize,
    /// Step size passed to the first-order oracle.
    pub alpha: f64,
    pub seed: u64,
    /// Number of `λ` values in `[0, 1/b]` for the MGF test.
    pub lambda_points: usize,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            queries: 10_000,
            alpha: 1.0,
            seed: 0,
            lambda_points: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificationRow {
    pub probe: usize,
    pub test: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CertificationReport {
    pub rows: Vec<CertificationRow>,
}

impl CertificationReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["probe", "test", "statistic", "threshold", "pass"])?;
        for r in &self.rows {
            w.write_record([
                r.probe.to_string(),
                r.test.clone(),
                r.statistic.to_string(),
                r.threshold.to_string(),
                (r.pass as u8).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Statistical tests of the oracle contracts at each probe point.
///
/// - `accuracy_event`: one-sided 99 % Wilson test that the gradient accuracy
///   event has probability at least `1 − δ`.
/// - `mean_error`: one-sided 99 % test that `E|f − φ| ≤ ε_f`.
/// - `mgf_envelope` (sub-exponential oracles only): at each `λ` on a grid of
///   `[0, 1/b]`, the lower 99 % confidence limit of the centred empirical MGF
///   of `|f − φ|` stays below `exp(λ²ν²/2)`. The statistic is the largest
///   ratio of that limit to the envelope.
pub fn certify_oracles(
    problem: &ProblemInstance,
    zeroth: &ZerothOracle,
    first: &FirstOracle,
    probes: &[Vector],
    cfg: &CertifyConfig,
) -> CertificationReport {
    let mut rows = Vec::new();
    let n = cfg.queries;
    for (pi, x) in probes.iter().enumerate() {
        let probe_seed = cfg.seed.wrapping_add(pi as u64);
        let grad = problem.gradient(x);
        let hits = (0..n)
            .filter(|&q| {
                let mut rng = query_stream(probe_seed, q as u64, Purpose::Gradient);
                let g = first.estimate(problem, x, cfg.alpha, &mut rng);
                first.spec.accuracy_event(&g, &grad, cfg.alpha)
            })
            .count();
        let target = 1.0 - first.spec.delta;
        rows.push(CertificationRow {
            probe: pi,
            test: "accuracy_event".to_string(),
            statistic: hits as f64 / n as f64,
            threshold: target,
            pass: wilson99_upper(hits as u64, n as u64) >= target,
        });

        let phi = problem.value(x);
        let errors: Vec<f64> = (0..n)
            .map(|q| {
                let mut rng = query_stream(probe_seed, q as u64, Purpose::FCurr);
                (zeroth.estimate(problem, x, &mut rng) - phi).abs()
            })
            .collect();
        let mean = crate::stats::mean(&errors);
        let sd = crate::stats::sample_std(&errors);
        let eps_f = zeroth.spec.eps_f;
        rows.push(CertificationRow {
            probe: pi,
            test: "mean_error".to_string(),
            statistic: mean,
            threshold: eps_f,
            pass: mean - Z_ONE_SIDED_99 * sd / (n as f64).sqrt() <= eps_f,
        });

        if zeroth.spec.mode == NoiseMode::Subexponential && zeroth.spec.b > 0.0 {
            let ratio = mgf_envelope_ratio(&errors, zeroth.spec.nu, zeroth.spec.b, cfg.lambda_points);
            rows.push(CertificationRow {
                probe: pi,
                test: "mgf_envelope".to_string(),
                statistic: ratio,
                threshold: 1.0,
                pass: ratio <= 1.0,
            });
        }
    }
    CertificationReport { rows }
}

/// Largest ratio, over `points` values of `λ` evenly spaced in `[0, 1/b]`, of
/// the lower 99 % confidence limit of `E exp(λ(e − ē))` to `exp(λ²ν²/2)`.
pub fn mgf_envelope_ratio(errors: &[f64], nu: f64, b: f64, points: usize) -> f64 {
    let mean = crate::stats::mean(errors);
    let n = errors.len() as f64;
    let mut worst: f64 = 0.0;
    for j in 0..points {
        let lambda = if points > 1 {
            j as f64 / ((points - 1) as f64 * b)
        } else {
            1.0 / b
        };
        let vals: Vec<f64> = errors.iter().map(|e| (lambda * (e - mean)).exp()).collect();
        let m = crate::stats::mean(&vals);
        let se = crate::stats::sample_std(&vals) / n.sqrt();
        let envelope = (0.5 * lambda * lambda * nu * nu).exp();
        worst = worst.max((m - Z_ONE_SIDED_99 * se) / envelope);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;
    use crate::oracle::{FirstOracleSpec, ZerothOracleSpec};
    use crate::problem::make_strongly_convex_quadratic;
    use crate::rng::seeded;
    use rand::Rng;

    #[test]
    fn empirical_tail_examples() {
        assert_eq!(empirical_tail(&[Some(5), Some(5)], 5), 1.0);
        assert_eq!(empirical_tail(&[None, None], 100), 0.0);
        assert!((empirical_tail(&[Some(3), Some(7), None], 6) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn benign_path_passes() {
        let n = 50;
        let v = verify_path_lemmas(&vec![true; n], &vec![true; n], &vec![true; n], None, 0.0);
        assert!(v.all());
    }

    #[test]
    fn all_unsuccessful_path() {
        // α0 = 1, γ = ½, τ = ¼: two large failures, then small failures only
        let n = 10;
        let large: Vec<bool> = (0..n).map(|k| k < 2).collect();
        let v = verify_path_lemmas(&vec![false; n], &vec![false; n], &large, None, 2.0);
        assert!(v.lemma2 && v.corollary1);
        // with d = 1 the second large failure breaks the inequality
        let v = verify_path_lemmas(&vec![false; n], &vec![false; n], &large, None, 1.0);
        assert!(!v.lemma2);
    }

    #[test]
    fn lemma3_detects_small_true_failures() {
        let v = verify_path_lemmas(&[true, true], &[false, false], &[false, false], None, 0.0);
        assert!(!v.lemma3);
        // the check stops at T_ε
        let v = verify_path_lemmas(&[true, true], &[false, false], &[false, false], Some(0), 0.0);
        assert!(v.lemma3);
    }

    /// Abstract step-size process: small true steps always succeed, every
    /// other step succeeds at random.
    #[test]
    fn abstract_process_paths_never_violate() {
        let mut rng = seeded(42);
        let gamma: f64 = 0.5;
        for path in 0..10_000 {
            let tau_exp = rng.random_range(0..4);
            let tau = gamma.powi(tau_exp);
            let d = tau_exp as f64;
            let p = rng.random_range(0.5..1.0);
            let q = rng.random_range(0.0..1.0);
            let mut level = 0i32;
            let (mut i_f, mut s_f, mut u_f) = (Vec::new(), Vec::new(), Vec::new());
            for _ in 0..200 {
                let alpha = gamma.powi(level);
                let is_true = rng.random_bool(p);
                let small_now = alpha <= tau;
                let success = if small_now && is_true { true } else { rng.random_bool(q) };
                let next_level = if success { (level - 1).max(0) } else { level + 1 };
                let next = gamma.powi(next_level);
                i_f.push(is_true);
                s_f.push(success);
                u_f.push(alpha.min(next) >= tau);
                level = next_level;
            }
            let v = verify_path_lemmas(&i_f, &s_f, &u_f, None, d);
            assert!(v.all(), "path {path}: {v:?}");
        }
    }

    fn exact_experiment(trials: usize) -> Experiment {
        let text = format!("trials = {trials}\nbudget = 5000\n[stopping]\neps = 1e-6\n");
        ExperimentConfig::parse(&text).unwrap().build().unwrap()
    }

    #[test]
    fn single_exact_trial_is_a_step_function() {
        let exp = exact_experiment(1);
        let s = run_trials(&exp, RunOptions::default()).unwrap();
        let t = s.trials[0].t_eps.unwrap() as u64;
        let samples = s.stopping_samples();
        assert_eq!(empirical_tail(&samples, t - 1), 0.0);
        assert_eq!(empirical_tail(&samples, t), 1.0);
        assert!(s.failures.is_empty(), "{:?}", s.failures);
    }

    #[test]
    fn replay_is_identical_across_worker_counts() {
        let text = "trials = 16\nbudget = 200\n[zeroth]\nmode = \"bounded\"\neps_f = 1e-3\n\
                    [first]\nkind = \"synthetic\"\nkappa = 1.0\ndelta = 0.1\n\
                    [problem]\nclass = \"nonconvex\"\n[stopping]\neps = 1.0\n[theory]\nenforce = false\n";
        let exp = ExperimentConfig::parse(text).unwrap().build().unwrap();
        let a = run_trials(&exp, RunOptions { jobs: Some(1), keep_traces: false }).unwrap();
        let b = run_trials(&exp, RunOptions { jobs: Some(4), keep_traces: false }).unwrap();
        assert_eq!(a, b);
        let mut ca = Vec::new();
        write_trials_csv(&a, &mut ca).unwrap();
        let mut cb = Vec::new();
        write_trials_csv(&b, &mut cb).unwrap();
        assert_eq!(ca, cb);
    }

    #[test]
    fn inadmissible_constants_refuse_to_run() {
        let text = "[zeroth]\nmode = \"bounded\"\neps_f = 10.0\n[first]\nkind = \"synthetic\"\ndelta = 0.4\n";
        let exp = ExperimentConfig::parse(text).unwrap().build().unwrap();
        assert!(matches!(run_trials(&exp, RunOptions::default()), Err(HarnessError::Inadmissible(_))));
    }

    fn quad() -> ProblemInstance {
        make_strongly_convex_quadratic(5, 0.5, 2.0, 1).unwrap()
    }

    #[test]
    fn exact_oracles_certify() {
        let p = quad();
        let rep = certify_oracles(
            &p,
            &ZerothOracle::exact(),
            &FirstOracle::exact(),
            &[p.x0.clone()],
            &CertifyConfig { queries: 500, ..Default::default() },
        );
        assert!(rep.all_pass(), "{rep:?}");
    }

    #[test]
    fn planted_failure_rate_is_caught() {
        let p = quad();
        let spec = FirstOracleSpec { eps_g: 0.1, kappa: 0.5, delta: 0.05 };
        let honest = FirstOracle::synthetic(spec);
        let liar = FirstOracle::synthetic_with_failure_rate(spec, 0.1);
        let cfg = CertifyConfig { queries: 10_000, ..Default::default() };
        let probes = [p.x0.clone()];
        let ok = certify_oracles(&p, &ZerothOracle::exact(), &honest, &probes, &cfg);
        let bad = certify_oracles(&p, &ZerothOracle::exact(), &liar, &probes, &cfg);
        assert!(ok.all_pass());
        assert!(!bad.all_pass());
    }

    #[test]
    fn subexponential_oracle_meets_envelope() {
        let p = quad();
        let z = ZerothOracle::synthetic(ZerothOracleSpec::subexponential(0.01, 0.01, 0.01, 0.005));
        let rep = certify_oracles(
            &p,
            &z,
            &FirstOracle::exact(),
            &[p.x0.clone()],
            &CertifyConfig { queries: 20_000, ..Default::default() },
        );
        assert!(rep.rows.iter().any(|r| r.test == "mgf_envelope"));
        assert!(rep.all_pass(), "{rep:?}");
    }
}
