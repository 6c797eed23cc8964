//! Probabilistic zeroth- and first-order oracles.
//!
//! A zeroth-order oracle returns `f(x) = φ(x) ± e(x)` with `e ≥ 0`,
//! `E e ≤ ε_f` and a one-sided sub-exponential tail with parameters `(ν, b)`.
//! A first-order oracle returns `g(x)` with
//! `P(‖g − ∇φ(x)‖ ≤ max{ε_g, κα‖g‖}) ≥ 1 − δ`.
//!
//! Three constructions are provided: synthetic noise injectors around the
//! exact quantities, mini-batch averages over an [`ErmDataset`], and the
//! Gaussian-smoothed forward-difference gradient built on any zeroth-order
//! oracle. The sample-size formulas that make the latter two valid oracles
//! live at the bottom of the module.

use std::f64::consts::{E, SQRT_2};
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::problem::{ErmDataset, ProblemInstance, Vector};
use crate::rng::Stream;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum OracleError {
    #[error("invalid oracle parameter: {0}")]
    InvalidParameter(String),
    #[error("empty mini-batch")]
    EmptyBatch,
    #[error("sample size is infinite: {0}")]
    InfiniteSampleSize(String),
}

/// Noise regime of a zeroth-order oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    Exact,
    Bounded,
    Subexponential,
}

/// Declared constants of a zeroth-order oracle.
///
/// `mean_slack` is `u = ε_f − E e(x)`: the synthetic injector draws errors
/// with mean exactly `ε_f − u`. Bounded mode draws `e ~ U[0, ε_f]`, so its
/// slack is fixed at `ε_f/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZerothOracleSpec {
    pub eps_f: f64,
    pub nu: f64,
    pub b: f64,
    pub mode: NoiseMode,
    pub mean_slack: f64,
}

impl ZerothOracleSpec {
    pub fn exact() -> Self {
        Self {
            eps_f: 0.0,
            nu: 0.0,
            b: 0.0,
            mode: NoiseMode::Exact,
            mean_slack: 0.0,
        }
    }

    pub fn bounded(eps_f: f64) -> Self {
        Self {
            eps_f,
            nu: 0.0,
            b: 0.0,
            mode: NoiseMode::Bounded,
            mean_slack: 0.5 * eps_f,
        }
    }

    pub fn subexponential(eps_f: f64, nu: f64, b: f64, mean_slack: f64) -> Self {
        Self {
            eps_f,
            nu,
            b,
            mode: NoiseMode::Subexponential,
            mean_slack,
        }
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        let bad = |m: &str| Err(OracleError::InvalidParameter(m.to_string()));
        for (name, v) in [("eps_f", self.eps_f), ("nu", self.nu), ("b", self.b)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be finite and >= 0"));
            }
        }
        match self.mode {
            NoiseMode::Exact if self.eps_f != 0.0 || self.nu != 0.0 || self.b != 0.0 => {
                bad("exact mode requires eps_f = nu = b = 0")
            }
            NoiseMode::Subexponential if !(self.mean_slack >= 0.0 && self.mean_slack <= self.eps_f) => {
                bad("mean slack u must lie in [0, eps_f]")
            }
            _ => Ok(()),
        }
    }

    /// Mean of the injected error.
    pub fn target_mean(&self) -> f64 {
        match self.mode {
            NoiseMode::Exact => 0.0,
            NoiseMode::Bounded => 0.5 * self.eps_f,
            NoiseMode::Subexponential => self.eps_f - self.mean_slack,
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self.mode, NoiseMode::Subexponential)
    }
}

/// Declared constants of a first-order oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstOracleSpec {
    pub eps_g: f64,
    pub kappa: f64,
    pub delta: f64,
}

impl FirstOracleSpec {
    pub fn exact() -> Self {
        Self {
            eps_g: 0.0,
            kappa: 0.0,
            delta: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        if !(self.eps_g >= 0.0 && self.eps_g.is_finite()) {
            return Err(OracleError::InvalidParameter("eps_g must be finite and >= 0".into()));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(OracleError::InvalidParameter("kappa must be finite and >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(OracleError::InvalidParameter("delta must lie in [0,1)".into()));
        }
        Ok(())
    }

    /// `‖g − ∇φ‖ ≤ max{ε_g, κα‖g‖}`.
    pub fn accuracy_event(&self, g: &Vector, grad: &Vector, alpha: f64) -> bool {
        (g - grad).norm() <= self.eps_g.max(self.kappa * alpha * g.norm())
    }
}

/// One-sided sub-exponential error law.
///
/// `e = (m − θ) + θ·X` with `X ~ Exp(1)` and `θ = min{ν/√2, b/2, m}`. The
/// mean is exactly `m`, `e ≥ 0`, and the centred MGF is
/// `exp(−λθ)/(1 − λθ) ≤ exp(λ²θ²) ≤ exp(λ²ν²/2)` for every `λ ∈ [0, 1/b]`.
pub fn sample_one_sided_subexp(nu: f64, b: f64, target_mean: f64, rng: &mut impl Rng) -> f64 {
    let theta = subexp_scale(nu, b, target_mean);
    if theta <= 0.0 {
        return target_mean.max(0.0);
    }
    let x: f64 = rng.sample(Exp1);
    (target_mean - theta) + theta * x
}

/// Scale `θ` of the exponential component in [`sample_one_sided_subexp`].
pub fn subexp_scale(nu: f64, b: f64, target_mean: f64) -> f64 {
    (nu / SQRT_2).min(0.5 * b).min(target_mean).max(0.0)
}

fn fair_sign(rng: &mut impl Rng) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

fn random_unit(dim: usize, rng: &mut impl Rng) -> Vector {
    loop {
        let v = Vector::from_fn(dim, |_, _| rng.sample(StandardNormal));
        let n = v.norm();
        if n > 0.0 {
            return v / n;
        }
    }
}

/// Draw `size` indices uniformly with replacement; `size ≥ n` selects the full
/// dataset in ascending order.
pub fn sample_batch(n: usize, size: usize, rng: &mut impl Rng) -> Vec<usize> {
    if size >= n {
        return (0..n).collect();
    }
    (0..size).map(|_| rng.random_range(0..n)).collect()
}

pub fn minibatch_value(data: &ErmDataset, x: &Vector, batch: &[usize]) -> Result<f64, OracleError> {
    data.mean_loss(x, batch.iter().copied())
        .ok_or(OracleError::EmptyBatch)
}

pub fn minibatch_gradient(
    data: &ErmDataset,
    x: &Vector,
    batch: &[usize],
) -> Result<Vector, OracleError> {
    data.mean_grad(x, batch.iter().copied())
        .ok_or(OracleError::EmptyBatch)
}

#[derive(Debug, Clone)]
pub enum ZerothSource {
    /// Exact value plus noise drawn with the declared constants.
    Synthetic,
    MiniBatch {
        data: Arc<ErmDataset>,
        batch_size: usize,
    },
}

#[derive(Debug, Clone)]
pub struct ZerothOracle {
    pub spec: ZerothOracleSpec,
    pub source: ZerothSource,
}

impl ZerothOracle {
    pub fn exact() -> Self {
        Self::synthetic(ZerothOracleSpec::exact())
    }

    pub fn synthetic(spec: ZerothOracleSpec) -> Self {
        Self {
            spec,
            source: ZerothSource::Synthetic,
        }
    }

    /// Mini-batch oracle. `spec` carries the constants the analysis should
    /// use; the noise itself comes from sampling.
    pub fn minibatch(data: Arc<ErmDataset>, batch_size: usize, spec: ZerothOracleSpec) -> Self {
        Self {
            spec,
            source: ZerothSource::MiniBatch { data, batch_size },
        }
    }

    pub fn estimate(&self, problem: &ProblemInstance, x: &Vector, rng: &mut Stream) -> f64 {
        match &self.source {
            ZerothSource::Synthetic => {
                let phi = problem.value(x);
                let e = match self.spec.mode {
                    NoiseMode::Exact => return phi,
                    NoiseMode::Bounded => self.spec.eps_f * rng.random::<f64>(),
                    NoiseMode::Subexponential => sample_one_sided_subexp(
                        self.spec.nu,
                        self.spec.b,
                        self.spec.target_mean(),
                        rng,
                    ),
                };
                phi + fair_sign(rng) * e
            }
            ZerothSource::MiniBatch { data, batch_size } => {
                let batch = sample_batch(data.len(), *batch_size, rng);
                minibatch_value(data, x, &batch).expect("batch size is positive")
            }
        }
    }

    /// Query with a full log including the recomputed error.
    pub fn query(
        &self,
        problem: &ProblemInstance,
        x: &Vector,
        rng: &mut Stream,
    ) -> (f64, OracleQueryLog) {
        let f = self.estimate(problem, x, rng);
        let phi = problem.value(x);
        let log = OracleQueryLog {
            x: x.clone(),
            alpha_input: None,
            estimate: QueryValue::Scalar(f),
            true_value: QueryValue::Scalar(phi),
            error_magnitude: (f - phi).abs(),
            accuracy_event: None,
        };
        (f, log)
    }
}

/// Size of the corruption applied on a failed first-order query:
/// `scale·‖∇φ(x)‖ + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adversary {
    pub scale: f64,
    pub offset: f64,
}

impl Default for Adversary {
    fn default() -> Self {
        Self {
            scale: 10.0,
            offset: 10.0,
        }
    }
}

#[derive(Debug, Clone)]
pub enum FirstSource {
    /// `∇φ(x)` plus a perturbation inside the accuracy ball with probability
    /// `1 − failure_rate`, and a large corruption otherwise.
    Synthetic {
        failure_rate: f64,
        adversary: Adversary,
    },
    MiniBatch {
        data: Arc<ErmDataset>,
        batch_size: usize,
    },
    /// Gaussian-smoothed forward differences over `directions` samples.
    Gsg {
        zeroth: Box<ZerothOracle>,
        sigma: f64,
        directions: usize,
    },
}

#[derive(Debug, Clone)]
pub struct FirstOracle {
    pub spec: FirstOracleSpec,
    pub source: FirstSource,
}

impl FirstOracle {
    pub fn exact() -> Self {
        Self::synthetic(FirstOracleSpec::exact())
    }

    /// Synthetic oracle failing with probability exactly `spec.delta`.
    pub fn synthetic(spec: FirstOracleSpec) -> Self {
        Self {
            spec,
            source: FirstSource::Synthetic {
                failure_rate: spec.delta,
                adversary: Adversary::default(),
            },
        }
    }

    /// Synthetic oracle whose real failure rate differs from the declared δ.
    pub fn synthetic_with_failure_rate(spec: FirstOracleSpec, failure_rate: f64) -> Self {
        Self {
            spec,
            source: FirstSource::Synthetic {
                failure_rate,
                adversary: Adversary::default(),
            },
        }
    }

    pub fn minibatch(data: Arc<ErmDataset>, batch_size: usize, spec: FirstOracleSpec) -> Self {
        Self {
            spec,
            source: FirstSource::MiniBatch { data, batch_size },
        }
    }

    pub fn gsg(zeroth: ZerothOracle, sigma: f64, directions: usize, spec: FirstOracleSpec) -> Self {
        Self {
            spec,
            source: FirstSource::Gsg {
                zeroth: Box::new(zeroth),
                sigma,
                directions,
            },
        }
    }

    pub fn estimate(
        &self,
        problem: &ProblemInstance,
        x: &Vector,
        alpha: f64,
        rng: &mut Stream,
    ) -> Vector {
        match &self.source {
            FirstSource::Synthetic {
                failure_rate,
                adversary,
            } => {
                let grad = problem.gradient(x);
                let gnorm = grad.norm();
                let ka = self.spec.kappa * alpha;
                let radius = self.spec.eps_g.max(ka * gnorm / (1.0 + ka));
                if *failure_rate <= 0.0 && radius <= 0.0 {
                    return grad;
                }
                let fail = *failure_rate > 0.0 && rng.random::<f64>() < *failure_rate;
                let dir = random_unit(x.len(), rng);
                if fail {
                    let magnitude = adversary.scale * gnorm + adversary.offset;
                    grad + dir * magnitude
                } else {
                    let u: f64 = rng.random();
                    grad + dir * (u * radius)
                }
            }
            FirstSource::MiniBatch { data, batch_size } => {
                let batch = sample_batch(data.len(), *batch_size, rng);
                minibatch_gradient(data, x, &batch).expect("batch size is positive")
            }
            FirstSource::Gsg {
                zeroth,
                sigma,
                directions,
            } => gsg_gradient(problem, zeroth, x, *sigma, *directions, rng),
        }
    }

    pub fn query(
        &self,
        problem: &ProblemInstance,
        x: &Vector,
        alpha: f64,
        rng: &mut Stream,
    ) -> (Vector, OracleQueryLog) {
        let g = self.estimate(problem, x, alpha, rng);
        let grad = problem.gradient(x);
        let log = OracleQueryLog {
            x: x.clone(),
            alpha_input: Some(alpha),
            error_magnitude: (&g - &grad).norm(),
            accuracy_event: Some(self.spec.accuracy_event(&g, &grad, alpha)),
            estimate: QueryValue::Vector(g.clone()),
            true_value: QueryValue::Vector(grad),
        };
        (g, log)
    }
}

/// `g = Σᵢ (f(x+σuᵢ) − f(x)) uᵢ / (σN)` with one shared draw of `f(x)`.
pub fn gsg_gradient(
    problem: &ProblemInstance,
    zeroth: &ZerothOracle,
    x: &Vector,
    sigma: f64,
    directions: usize,
    rng: &mut Stream,
) -> Vector {
    assert!(sigma > 0.0, "sampling radius must be positive");
    assert!(directions > 0, "need at least one direction");
    let f0 = zeroth.estimate(problem, x, rng);
    let mut acc = Vector::zeros(x.len());
    let mut probe = x.clone();
    for _ in 0..directions {
        let u = Vector::from_fn(x.len(), |_, _| rng.sample(StandardNormal));
        probe.copy_from(x);
        probe.axpy(sigma, &u, 1.0);
        let f = zeroth.estimate(problem, &probe, rng);
        acc.axpy((f - f0) / sigma, &u, 1.0);
    }
    acc / directions as f64
}

#[derive(Debug, Clone, PartialEq)]
pub enum QueryValue {
    Scalar(f64),
    Vector(Vector),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleQueryLog {
    pub x: Vector,
    pub alpha_input: Option<f64>,
    pub estimate: QueryValue,
    pub true_value: QueryValue,
    pub error_magnitude: f64,
    pub accuracy_event: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubexpParams {
    pub eps_f: f64,
    pub nu: f64,
    pub b: f64,
}

/// Oracle constants of an `N`-sample mean whose per-sample errors are
/// `(ν̂, b̂)`-sub-exponential with standard deviation at most `ε̂`.
pub fn prop1_subexp_params(
    nu_hat: f64,
    b_hat: f64,
    eps_hat: f64,
    n: usize,
) -> Result<SubexpParams, OracleError> {
    if n == 0 {
        return Err(OracleError::InvalidParameter("sample size must be positive".into()));
    }
    let root = (n as f64).sqrt();
    let m = 8.0 * E * E * (nu_hat / root).max(b_hat);
    Ok(SubexpParams {
        eps_f: eps_hat / root,
        nu: m,
        b: m,
    })
}

fn ceil_count(v: f64) -> u64 {
    (v.ceil() as u64).max(1)
}

/// Mini-batch size making the gradient mean a first-order oracle:
/// `max{2M_c/(δε_g²), 2M_v(1+κα)²/(δκ²α²)}`.
pub fn prop2_sample_size(
    m_c: f64,
    m_v: f64,
    delta: f64,
    eps_g: f64,
    kappa: f64,
    alpha: f64,
) -> Result<u64, OracleError> {
    check_delta(delta)?;
    let ka = kappa * alpha;
    let bias_term = if m_c == 0.0 {
        0.0
    } else if eps_g > 0.0 {
        2.0 * m_c / (delta * eps_g * eps_g)
    } else {
        return Err(OracleError::InfiniteSampleSize("eps_g = 0 with M_c > 0".into()));
    };
    let relative_term = if m_v == 0.0 {
        0.0
    } else if ka > 0.0 {
        2.0 * m_v * (1.0 + ka).powi(2) / (delta * ka * ka)
    } else {
        return Err(OracleError::InfiniteSampleSize("kappa*alpha = 0 with M_v > 0".into()));
    };
    Ok(ceil_count(bias_term.max(relative_term)))
}

/// Gradient-norm dependent refinement:
/// `(M_c + M_v G²)/δ · min{1/ε_g², (1+κα)²/(κ²α²G²)}`.
pub fn prop2_sample_size_tight(
    m_c: f64,
    m_v: f64,
    delta: f64,
    eps_g: f64,
    kappa: f64,
    alpha: f64,
    grad_norm: f64,
) -> Result<u64, OracleError> {
    check_delta(delta)?;
    let spread = m_c + m_v * grad_norm * grad_norm;
    if spread == 0.0 {
        return Ok(1);
    }
    let ka = kappa * alpha;
    let first = if eps_g > 0.0 {
        1.0 / (eps_g * eps_g)
    } else {
        f64::INFINITY
    };
    let second = if ka * grad_norm > 0.0 {
        (1.0 + ka).powi(2) / (ka * ka * grad_norm * grad_norm)
    } else {
        f64::INFINITY
    };
    let factor = first.min(second);
    if !factor.is_finite() {
        return Err(OracleError::InfiniteSampleSize(
            "eps_g = 0 and kappa*alpha*|grad| = 0".into(),
        ));
    }
    Ok(ceil_count(spread / delta * factor))
}

fn check_delta(delta: f64) -> Result<(), OracleError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(OracleError::InvalidParameter("delta must lie in (0,1)".into()));
    }
    Ok(())
}

/// Output of [`prop3_params`]. A regime is `None` when its bound is infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GsgParams {
    pub eps_g: f64,
    pub sigma_star: f64,
    pub n_bias_regime: Option<u64>,
    pub n_relative_regime: Option<u64>,
    /// Smaller of the two available regimes.
    pub n: u64,
}

/// Bias and sample size of the smoothed finite-difference gradient in
/// dimension `n` with bounded function noise `ε_f`.
#[allow(clippy::too_many_arguments)]
pub fn prop3_params(
    n: usize,
    lipschitz: f64,
    sigma: f64,
    eps_f: f64,
    delta: f64,
    kappa: f64,
    alpha: f64,
    grad_norm: f64,
) -> Result<GsgParams, OracleError> {
    if !(sigma > 0.0) {
        return Err(OracleError::InvalidParameter("sigma must be positive".into()));
    }
    if n == 0 {
        return Err(OracleError::InvalidParameter("dimension must be positive".into()));
    }
    check_delta(delta)?;
    let nf = n as f64;
    let eps_g = gsg_bias_bound(n, lipschitz, sigma, eps_f);
    let numer = 0.75 * lipschitz.powi(2) * sigma.powi(2) * nf * (nf + 2.0) * (nf + 4.0)
        + 12.0 * eps_f * eps_f * nf / (sigma * sigma)
        + 18.0 * nf * grad_norm * grad_norm;
    let scaled = numer / delta;
    let regime = |factor: f64| {
        let v = scaled * factor;
        (v.is_finite()).then(|| ceil_count(v))
    };
    let n_bias_regime = if eps_g > 0.0 {
        regime(4.0 / (eps_g * eps_g))
    } else {
        None
    };
    let ka = kappa * alpha;
    let margin = ka / (1.0 + ka) * grad_norm - 0.5 * eps_g;
    let n_relative_regime = if margin > 0.0 {
        regime(1.0 / (margin * margin))
    } else {
        None
    };
    let best = match (n_bias_regime, n_relative_regime) {
        (Some(a), Some(b)) => a.min(b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => {
            return Err(OracleError::InfiniteSampleSize(
                "both accuracy regimes unavailable".into(),
            ))
        }
    };
    Ok(GsgParams {
        eps_g,
        sigma_star: (eps_f / lipschitz).sqrt(),
        n_bias_regime,
        n_relative_regime,
        n: best,
    })
}

/// `ε_g = 2(√n·L·σ + √n·ε_f/σ)`.
pub fn gsg_bias_bound(n: usize, lipschitz: f64, sigma: f64, eps_f: f64) -> f64 {
    let rn = (n as f64).sqrt();
    2.0 * (rn * lipschitz * sigma + rn * eps_f / sigma)
}
