//! Post-hoc analysis of a finished trace: which iterations were true, which
//! steps were large, the progress measure `Z_k` and the stopping time `T_ε`.

use serde::{Deserialize, Serialize};

use crate::aloe::{armijo_check, IterationRecord, Trace};
use crate::problem::{FunctionClass, ProblemInstance};
use crate::theory::{self, r_damage};

/// Relative slack used when comparing realised step sizes with the threshold;
/// capped step sizes drift from the exact grid by a few ulps.
pub const STEP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingSpec {
    pub class: FunctionClass,
    pub eps: f64,
    /// Gradient threshold of the convex stopping rule.
    pub eps1: Option<f64>,
}

/// `‖g_k−∇φ(x_k)‖ ≤ max{ε_g, κα_k‖g_k‖}` and `e_k + e_k⁺ ≤ 2ε_f`.
pub fn classify_true(record: &IterationRecord, eps_g: f64, kappa: f64, eps_f: f64) -> bool {
    let radius = eps_g.max(kappa * record.alpha * record.g.norm());
    record.grad_error_norm <= radius && record.e_curr + record.e_plus <= 2.0 * eps_f
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepClass {
    Large,
    Small,
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("step pair ({alpha}, {alpha_next}) straddles threshold {threshold}")]
pub struct Straddle {
    pub alpha: f64,
    pub alpha_next: f64,
    pub threshold: f64,
}

pub fn classify_large(alpha: f64, alpha_next: f64, threshold: f64) -> Result<StepClass, Straddle> {
    let lo = alpha.min(alpha_next);
    let hi = alpha.max(alpha_next);
    if lo >= threshold * (1.0 - STEP_TOL) {
        Ok(StepClass::Large)
    } else if hi <= threshold * (1.0 + STEP_TOL) {
        Ok(StepClass::Small)
    } else {
        Err(Straddle {
            alpha,
            alpha_next,
            threshold,
        })
    }
}

/// Threshold for the large/small split of one path: `tau` itself when no
/// consecutive pair straddles it, otherwise the largest realised step size
/// below `tau` that no pair straddles.
pub fn effective_threshold(step_sizes: &[f64], tau: f64) -> f64 {
    let clean = |t: f64| {
        step_sizes
            .windows(2)
            .all(|w| classify_large(w[0], w[1], t).is_ok())
    };
    if clean(tau) {
        return tau;
    }
    let mut candidates: Vec<f64> = step_sizes
        .iter()
        .copied()
        .filter(|&a| a <= tau)
        .collect();
    candidates.sort_by(|a, b| b.total_cmp(a));
    candidates.dedup();
    candidates
        .into_iter()
        .find(|&t| clean(t))
        .unwrap_or_else(|| step_sizes.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Progress measure from raw function values.
pub fn progress_z(class: FunctionClass, phi_x: f64, phi_star: f64, eps: f64) -> f64 {
    theory::progress_z(class, phi_x - phi_star, eps)
}

/// First `k` meeting the class-specific criterion, or `None` when censored.
pub fn stopping_time(trace: &Trace, problem: &ProblemInstance, spec: &StoppingSpec) -> Option<usize> {
    stopping_time_from(&trace.ground_truth(), problem.phi_star, spec)
}

fn stopping_time_from(truth: &[(f64, f64)], phi_star: f64, spec: &StoppingSpec) -> Option<usize> {
    truth.iter().position(|&(phi, grad)| match spec.class {
        FunctionClass::Nonconvex => grad <= spec.eps,
        FunctionClass::StronglyConvex => phi - phi_star <= spec.eps,
        FunctionClass::Convex => {
            phi - phi_star <= spec.eps || spec.eps1.is_some_and(|e1| grad <= e1)
        }
    })
}

/// Oracle and analysis constants the per-path audit needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditContext {
    pub eps_g: f64,
    pub kappa: f64,
    /// Step threshold before any per-path fallback.
    pub threshold: f64,
    pub alpha0: f64,
    pub gamma: f64,
    /// `h(α)` at the threshold; `None` skips the progress audit.
    pub h_at_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathReport {
    pub seed: u64,
    pub true_flags: Vec<bool>,
    pub success_flags: Vec<bool>,
    pub large_flags: Vec<bool>,
    pub t_eps: Option<usize>,
    pub budget: usize,
    pub z: Vec<f64>,
    pub threshold: f64,
    pub threshold_fallback: bool,
    pub d: f64,
    /// Recorded success flags agree with a recomputed Armijo test.
    pub armijo_consistent: bool,
    /// Good iterations before `T_ε` decrease `Z` by at least `h − r`.
    pub progress_ok: bool,
    /// Every iteration before `T_ε` raises `Z` by at most `r(ε_f, e_k+e_k⁺)`.
    pub damage_ok: bool,
    /// Small true iterations before `T_ε` are successful.
    pub small_true_success_ok: bool,
}

impl PathReport {
    pub fn build(
        trace: &Trace,
        problem: &ProblemInstance,
        spec: &StoppingSpec,
        ctx: &AuditContext,
    ) -> Self {
        let steps = trace.step_sizes();
        let threshold = effective_threshold(&steps, ctx.threshold);
        let d = theory::step_count_d(ctx.alpha0, threshold, ctx.gamma);
        let true_flags: Vec<bool> = trace
            .records
            .iter()
            .map(|r| classify_true(r, ctx.eps_g, ctx.kappa, r.eps_f))
            .collect();
        let success_flags: Vec<bool> = trace.records.iter().map(|r| r.success).collect();
        let large_flags: Vec<bool> = steps
            .windows(2)
            .map(|w| matches!(classify_large(w[0], w[1], threshold), Ok(StepClass::Large)))
            .collect();
        let truth = trace.ground_truth();
        let t_eps = stopping_time_from(&truth, problem.phi_star, spec);
        let z: Vec<f64> = truth
            .iter()
            .map(|&(phi, _)| progress_z(spec.class, phi, problem.phi_star, spec.eps))
            .collect();
        let armijo_consistent = trace.records.iter().all(|r| {
            armijo_check(r.f_plus, r.f_curr, r.alpha, trace.params.theta, r.g_norm_sq(), r.eps_f)
                == r.success
        });

        let horizon = t_eps.unwrap_or(trace.records.len()).min(trace.records.len());
        let tol = |zk: f64| 1e-9 * zk.abs().max(1.0);
        let mut progress_ok = true;
        let mut damage_ok = true;
        let mut small_true_success_ok = true;
        for k in 0..horizon {
            let r = &trace.records[k];
            let (zk, zn) = (z[k], z[k + 1]);
            let damage = r_damage(spec.class, r.eps_f, r.e_curr + r.e_plus, spec.eps);
            if zn > zk + damage + tol(zk) {
                damage_ok = false;
            }
            if true_flags[k] && !large_flags[k] && !success_flags[k] {
                small_true_success_ok = false;
            }
            if let Some(h) = ctx.h_at_threshold {
                if true_flags[k] && large_flags[k] && success_flags[k] {
                    let r2 = r_damage(spec.class, r.eps_f, 2.0 * r.eps_f, spec.eps);
                    if zn > zk - h + r2 + tol(zk) {
                        progress_ok = false;
                    }
                }
            }
        }

        Self {
            seed: trace.seed,
            true_flags,
            success_flags,
            large_flags,
            t_eps,
            budget: trace.records.len(),
            z,
            threshold,
            threshold_fallback: threshold != ctx.threshold,
            d,
            armijo_consistent,
            progress_ok,
            damage_ok,
            small_true_success_ok,
        }
    }

    pub fn censored(&self) -> bool {
        self.t_eps.is_none()
    }

    pub fn frac_true(&self) -> f64 {
        frac(&self.true_flags)
    }

    pub fn frac_success(&self) -> f64 {
        frac(&self.success_flags)
    }
}

fn frac(v: &[bool]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().filter(|&&b| b).count() as f64 / v.len() as f64
}
