//! The adaptive line-search loop.
//!
//! Each iteration queries the first-order oracle at the current step size,
//! forms the trial point `x⁺ = x − αg`, draws two fresh function estimates
//! and applies the relaxed Armijo test
//! `f(x⁺) ≤ f(x) − αθ‖g‖² + 2ε_f`. On success the point moves and the step
//! grows by `1/γ` (capped at `α_max`); otherwise the step shrinks by `γ`.
//!
//! The loop always runs the full budget. Stopping times are computed later
//! from the recorded ground truth.
//!
//! When both oracles sample mini-batches, the three queries of an iteration
//! draw from one shared stream and therefore see the same mini-batch.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::oracle::{FirstOracle, FirstSource, ZerothOracle, ZerothSource};
use crate::problem::{ProblemInstance, Vector};
use crate::rng::{query_stream, Purpose};

#[derive(Debug, thiserror::Error)]
pub enum AloeError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("non-finite {what} at iteration {k}")]
    NonFinite { k: usize, what: &'static str },
    #[error("dimension mismatch: problem has {expected}, start point has {got}")]
    Dimension { expected: usize, got: usize },
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AloeParams {
    /// Slack constant in the relaxed Armijo test.
    pub eps_f: f64,
    pub alpha0: f64,
    pub alpha_max: f64,
    pub theta: f64,
    pub gamma: f64,
    pub max_iters: usize,
}

impl Default for AloeParams {
    fn default() -> Self {
        Self {
            eps_f: 0.0,
            alpha0: 1.0,
            alpha_max: 10.0,
            theta: 0.2,
            gamma: 0.8,
            max_iters: 1000,
        }
    }
}

impl AloeParams {
    /// Every violated constraint, in a fixed order.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.eps_f >= 0.0 && self.eps_f.is_finite()) {
            out.push("eps_f must be finite and >= 0".to_string());
        }
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            out.push("alpha0 must be positive".to_string());
        }
        if !(self.alpha_max.is_finite() && self.alpha0 < self.alpha_max) {
            out.push("alpha0 must be smaller than alpha_max".to_string());
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            out.push("theta must lie in (0,1)".to_string());
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            out.push("gamma must lie in (0,1)".to_string());
        }
        if self.max_iters == 0 {
            out.push("max_iters must be positive".to_string());
        }
        out
    }

    pub fn validate(&self) -> Result<(), AloeError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(AloeError::InvalidParams(v.join("; ")))
        }
    }
}

/// `f_plus ≤ f_curr − αθ‖g‖² + 2ε_f`, ties accepted.
#[inline]
pub fn armijo_check(
    f_plus: f64,
    f_curr: f64,
    alpha: f64,
    theta: f64,
    g_norm_sq: f64,
    eps_f: f64,
) -> bool {
    f_plus <= f_curr - alpha * theta * g_norm_sq + 2.0 * eps_f
}

#[inline]
pub fn step_update(alpha: f64, success: bool, gamma: f64, alpha_max: f64) -> f64 {
    if success {
        alpha_max.min(alpha / gamma)
    } else {
        gamma * alpha
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub x: Vector,
    pub alpha: f64,
    pub g: Vector,
    pub f_curr: f64,
    pub f_plus: f64,
    pub success: bool,
    /// `|f_curr − φ(x_k)|`.
    pub e_curr: f64,
    /// `|f_plus − φ(x_k⁺)|`.
    pub e_plus: f64,
    pub grad_true_norm: f64,
    pub grad_error_norm: f64,
    pub phi_curr: f64,
    pub phi_plus: f64,
    /// Slack constant in force at this iteration.
    pub eps_f: f64,
}

impl IterationRecord {
    pub fn g_norm_sq(&self) -> f64 {
        self.g.norm_squared()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub records: Vec<IterationRecord>,
    pub params: AloeParams,
    pub seed: u64,
    pub final_x: Vector,
    pub final_alpha: f64,
    pub final_phi: f64,
    pub final_grad_norm: f64,
}

impl Trace {
    /// `α_0, …, α_T` including the step size after the last iteration.
    pub fn step_sizes(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.records.iter().map(|r| r.alpha).collect();
        out.push(self.final_alpha);
        out
    }

    /// `(φ(x_k), ‖∇φ(x_k)‖)` for `k = 0..=T`.
    pub fn ground_truth(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = self
            .records
            .iter()
            .map(|r| (r.phi_curr, r.grad_true_norm))
            .collect();
        out.push((self.final_phi, self.final_grad_norm));
        out
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), AloeError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "k",
            "alpha",
            "f_curr",
            "f_plus",
            "success",
            "e_curr",
            "e_plus",
            "grad_true_norm",
            "phi_curr",
        ])?;
        for r in &self.records {
            w.write_record([
                r.k.to_string(),
                r.alpha.to_string(),
                r.f_curr.to_string(),
                r.f_plus.to_string(),
                (r.success as u8).to_string(),
                r.e_curr.to_string(),
                r.e_plus.to_string(),
                r.grad_true_norm.to_string(),
                r.phi_curr.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

fn shares_batch(zeroth: &ZerothOracle, first: &FirstOracle) -> bool {
    matches!(zeroth.source, ZerothSource::MiniBatch { .. })
        && matches!(first.source, FirstSource::MiniBatch { .. })
}

/// Run the loop with a fixed slack constant `params.eps_f`.
pub fn aloe_run(
    problem: &ProblemInstance,
    zeroth: &ZerothOracle,
    first: &FirstOracle,
    params: &AloeParams,
    seed: u64,
) -> Result<Trace, AloeError> {
    let eps = params.eps_f;
    aloe_run_with_schedule(problem, zeroth, first, params, seed, |_, _| eps)
}

/// Run the loop with a slack constant chosen per iteration by `eps_f_at(k, x_k)`.
pub fn aloe_run_with_schedule<F>(
    problem: &ProblemInstance,
    zeroth: &ZerothOracle,
    first: &FirstOracle,
    params: &AloeParams,
    seed: u64,
    mut eps_f_at: F,
) -> Result<Trace, AloeError>
where
    F: FnMut(usize, &Vector) -> f64,
{
    params.validate()?;
    if problem.x0.len() != problem.dim() {
        return Err(AloeError::Dimension {
            expected: problem.dim(),
            got: problem.x0.len(),
        });
    }
    let mut x = problem.x0.clone();
    let mut alpha = params.alpha0;
    let mut phi = problem.value(&x);
    let mut grad = problem.gradient(&x);
    let mut records = Vec::with_capacity(params.max_iters);
    let shared = shares_batch(zeroth, first);

    for k in 0..params.max_iters {
        let kk = k as u64;
        let stream = |purpose| query_stream(seed, kk, if shared { Purpose::Batch } else { purpose });
        let eps_f = eps_f_at(k, &x);
        let g = first.estimate(problem, &x, alpha, &mut stream(Purpose::Gradient));
        if g.iter().any(|v| !v.is_finite()) {
            return Err(AloeError::NonFinite { k, what: "gradient estimate" });
        }
        let mut x_plus = x.clone();
        x_plus.axpy(-alpha, &g, 1.0);
        let f_curr = zeroth.estimate(problem, &x, &mut stream(Purpose::FCurr));
        let f_plus = zeroth.estimate(problem, &x_plus, &mut stream(Purpose::FPlus));
        if !f_curr.is_finite() || !f_plus.is_finite() {
            return Err(AloeError::NonFinite { k, what: "function estimate" });
        }
        let g_norm_sq = g.norm_squared();
        let success = armijo_check(f_plus, f_curr, alpha, params.theta, g_norm_sq, eps_f);
        let phi_plus = problem.value(&x_plus);
        let record = IterationRecord {
            k,
            x: x.clone(),
            alpha,
            f_curr,
            f_plus,
            success,
            e_curr: (f_curr - phi).abs(),
            e_plus: (f_plus - phi_plus).abs(),
            grad_true_norm: grad.norm(),
            grad_error_norm: (&g - &grad).norm(),
            phi_curr: phi,
            phi_plus,
            eps_f,
            g,
        };
        records.push(record);
        if success {
            x = x_plus;
            phi = phi_plus;
            grad = problem.gradient(&x);
        }
        alpha = step_update(alpha, success, params.gamma, params.alpha_max);
    }

    Ok(Trace {
        records,
        params: *params,
        seed,
        final_grad_norm: grad.norm(),
        final_x: x,
        final_alpha: alpha,
        final_phi: phi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{FirstOracleSpec, ZerothOracleSpec};
    use crate::problem::{make_nonconvex_cosine, make_strongly_convex_quadratic};
    use nalgebra::dvector;
    use proptest::prelude::*;

    #[test]
    fn minibatch_queries_share_one_batch() {
        use crate::oracle::{minibatch_value, sample_batch};
        use crate::problem::make_synthetic_logistic;
        let (p, data) = make_synthetic_logistic(300, 3, 2).unwrap();
        let z = ZerothOracle::minibatch(data.clone(), 16, ZerothOracleSpec::exact());
        let f = FirstOracle::minibatch(data.clone(), 16, FirstOracleSpec::exact());
        let params = AloeParams { max_iters: 5, ..AloeParams::default() };
        let tr = aloe_run(&p, &z, &f, &params, 9).unwrap();
        for r in &tr.records {
            let batch = sample_batch(data.len(), 16, &mut query_stream(9, r.k as u64, Purpose::Batch));
            assert_eq!(r.f_curr, minibatch_value(&data, &r.x, &batch).unwrap());
        }
    }

    #[test]
    fn armijo_examples() {
        assert!(!armijo_check(0.9, 1.0, 1.0, 0.2, 1.0, 0.0));
        assert!(armijo_check(0.9, 1.0, 1.0, 0.2, 1.0, 0.1));
        assert!(armijo_check(1.0, 1.0, 1.0, 0.2, 0.0, 0.0));
    }

    #[test]
    fn step_update_examples() {
        assert_eq!(step_update(1.0, true, 0.8, 10.0), 1.25);
        assert_eq!(step_update(1.0, false, 0.8, 10.0), 0.8);
        assert_eq!(step_update(9.0, true, 0.8, 10.0), 10.0);
    }

    #[test]
    fn one_exact_step_to_minimum() {
        let p = make_strongly_convex_quadratic(2, 1.0, 1.0, 0)
            .unwrap()
            .with_x0(dvector![1.0, 0.0]);
        let params = AloeParams {
            alpha0: 1.0,
            max_iters: 1,
            ..AloeParams::default()
        };
        let t = aloe_run(&p, &ZerothOracle::exact(), &FirstOracle::exact(), &params, 0).unwrap();
        let r = &t.records[0];
        assert_eq!(r.g, dvector![1.0, 0.0]);
        assert!(r.success);
        assert_eq!(t.final_x, dvector![0.0, 0.0]);
        assert_eq!(t.final_alpha, 1.25);
    }

    #[test]
    fn pure_backtracking_is_geometric() {
        let p = make_strongly_convex_quadratic(3, 1.0, 2.0, 1).unwrap();
        let spec = FirstOracleSpec {
            eps_g: 0.0,
            kappa: 0.0,
            delta: 0.5,
        };
        let mut first = FirstOracle::synthetic_with_failure_rate(spec, 1.0);
        if let crate::oracle::FirstSource::Synthetic { adversary, .. } = &mut first.source {
            adversary.offset = 1e6;
        }
        let params = AloeParams {
            alpha0: 1.0,
            alpha_max: 2.0,
            gamma: 0.5,
            max_iters: 20,
            ..AloeParams::default()
        };
        let t = aloe_run(&p, &ZerothOracle::exact(), &first, &params, 3).unwrap();
        for r in &t.records {
            assert!(!r.success);
            assert_eq!(r.alpha, 0.5f64.powi(r.k as i32));
        }
        assert_eq!(t.final_x, p.x0);
    }

    #[test]
    fn replay_is_bit_identical() {
        let p = make_nonconvex_cosine(5, 1.0, 2.0, 2).unwrap();
        let z = ZerothOracle::synthetic(ZerothOracleSpec::subexponential(0.01, 0.01, 0.01, 0.005));
        let f = FirstOracle::synthetic(FirstOracleSpec {
            eps_g: 0.05,
            kappa: 0.5,
            delta: 0.1,
        });
        let params = AloeParams {
            eps_f: 0.01,
            max_iters: 200,
            ..AloeParams::default()
        };
        let a = aloe_run(&p, &z, &f, &params, 77).unwrap();
        let b = aloe_run(&p, &z, &f, &params, 77).unwrap();
        let c = aloe_run(&p, &z, &f, &params, 78).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let mut ca = Vec::new();
        let mut cb = Vec::new();
        a.write_csv(&mut ca).unwrap();
        b.write_csv(&mut cb).unwrap();
        assert_eq!(ca, cb);
        let text = String::from_utf8(ca).unwrap();
        assert!(text.starts_with("k,alpha,f_curr,f_plus,success,e_curr,e_plus,grad_true_norm,phi_curr\n"));
        assert_eq!(text.lines().count(), 201);
    }

    #[test]
    fn invalid_params_rejected() {
        let p = make_strongly_convex_quadratic(2, 1.0, 1.0, 0).unwrap();
        let bad = AloeParams {
            gamma: 1.5,
            alpha0: 20.0,
            ..AloeParams::default()
        };
        let err = aloe_run(&p, &ZerothOracle::exact(), &FirstOracle::exact(), &bad, 0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("gamma must lie in (0,1)"));
        assert!(msg.contains("alpha0 must be smaller than alpha_max"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn trace_invariants(
            seed in 0u64..10_000,
            eps_f in 0.0f64..0.05,
            eps_g in 0.0f64..0.2,
            kappa in 0.0f64..2.0,
            delta in 0.0f64..0.3,
            gamma in 0.3f64..0.95,
            theta in 0.05f64..0.6,
        ) {
            let p = make_nonconvex_cosine(4, 0.8, 2.0, seed).unwrap();
            let z = ZerothOracle::synthetic(ZerothOracleSpec::bounded(eps_f));
            let f = FirstOracle::synthetic(FirstOracleSpec { eps_g, kappa, delta });
            let params = AloeParams { eps_f, theta, gamma, alpha0: 1.0, alpha_max: 5.0, max_iters: 150 };
            let t = aloe_run(&p, &z, &f, &params, seed).unwrap();
            let mut x = p.x0.clone();
            let mut alpha = params.alpha0;
            for r in &t.records {
                prop_assert_eq!(&r.x, &x);
                prop_assert_eq!(r.alpha, alpha);
                prop_assert!(r.alpha > 0.0 && r.alpha <= params.alpha_max);
                let again = armijo_check(r.f_plus, r.f_curr, r.alpha, theta, r.g_norm_sq(), eps_f);
                prop_assert_eq!(again, r.success);
                if r.success {
                    prop_assert!(r.f_plus <= r.f_curr - r.alpha * theta * r.g_norm_sq() + 2.0 * eps_f);
                    x = &x - &r.g * r.alpha;
                }
                alpha = step_update(alpha, r.success, gamma, params.alpha_max);
            }
            prop_assert_eq!(&t.final_x, &x);
        }

        #[test]
        fn exact_oracles_monotone(seed in 0u64..10_000) {
            let p = make_nonconvex_cosine(3, 1.0, 2.0, seed).unwrap();
            let params = AloeParams { max_iters: 100, ..AloeParams::default() };
            let t = aloe_run(&p, &ZerothOracle::exact(), &FirstOracle::exact(), &params, seed).unwrap();
            let phis: Vec<f64> = t.ground_truth().iter().map(|g| g.0).collect();
            for w in phis.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
        }
    }
}
