//! Instrumented test objectives.
//!
//! Every [`ProblemInstance`] carries exact value and gradient access together
//! with the constants the complexity analysis needs: the gradient Lipschitz
//! constant `L`, the strong-convexity modulus `β`, the iterate diameter `D`
//! (convex class only) and the global minimum value `φ*`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rng;

pub type Vector = DVector<f64>;

/// Function class used to pick stopping rule, progress measure and constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionClass {
    Nonconvex,
    Convex,
    StronglyConvex,
}

impl fmt::Display for FunctionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FunctionClass::Nonconvex => "nonconvex",
            FunctionClass::Convex => "convex",
            FunctionClass::StronglyConvex => "strongly_convex",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ProblemError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid spectrum bounds: need 0 < lambda_min <= lambda_max, got [{lambda_min}, {lambda_max}]")]
    InvalidSpectrum { lambda_min: f64, lambda_max: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Exact value and gradient of a smooth objective.
pub trait Objective: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;
}

#[derive(Debug, Clone)]
pub struct ProblemInstance {
    objective: Arc<dyn Objective>,
    pub lipschitz: f64,
    /// 0 when the objective is not strongly convex.
    pub strong_convexity: f64,
    pub diameter: Option<f64>,
    pub phi_star: f64,
    pub class: FunctionClass,
    pub x0: Vector,
    /// A global minimiser when one is known.
    pub minimizer: Option<Vector>,
}

impl ProblemInstance {
    pub fn new(
        objective: Arc<dyn Objective>,
        lipschitz: f64,
        phi_star: f64,
        class: FunctionClass,
        x0: Vector,
    ) -> Self {
        Self {
            objective,
            lipschitz,
            strong_convexity: 0.0,
            diameter: None,
            phi_star,
            class,
            x0,
            minimizer: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn objective(&self) -> &Arc<dyn Objective> {
        &self.objective
    }

    fn check_dim(&self, x: &Vector) -> Result<(), ProblemError> {
        if x.len() != self.dim() {
            return Err(ProblemError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn eval_value(&self, x: &Vector) -> Result<f64, ProblemError> {
        self.check_dim(x)?;
        Ok(self.objective.value(x))
    }

    pub fn eval_gradient(&self, x: &Vector) -> Result<Vector, ProblemError> {
        self.check_dim(x)?;
        Ok(self.objective.gradient(x))
    }

    /// Unchecked value, for inner loops whose dimensions are already fixed.
    #[inline]
    pub fn value(&self, x: &Vector) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        self.objective.value(x)
    }

    #[inline]
    pub fn gradient(&self, x: &Vector) -> Vector {
        debug_assert_eq!(x.len(), self.dim());
        self.objective.gradient(x)
    }

    /// Analyse the same objective under a weaker class (e.g. a quadratic as
    /// a nonconvex function).
    pub fn with_class(mut self, class: FunctionClass) -> Self {
        self.class = class;
        self
    }

    pub fn with_x0(mut self, x0: Vector) -> Self {
        assert_eq!(x0.len(), self.dim(), "x0 has wrong dimension");
        self.x0 = x0;
        self
    }

    pub fn with_x0_scaled(mut self, factor: f64) -> Self {
        self.x0 *= factor;
        self
    }

    /// `φ(x0) − φ*`.
    pub fn initial_gap(&self) -> f64 {
        self.value(&self.x0) - self.phi_star
    }
}

fn gaussian_vector(dim: usize, rng: &mut impl Rng) -> Vector {
    DVector::from_fn(dim, |_, _| rng.sample(StandardNormal))
}

fn random_orthogonal(dim: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

/// Geometrically spaced values from `lo` to `hi` inclusive.
fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![hi],
        _ => {
            let ratio = (hi / lo).ln();
            (0..count)
                .map(|i| {
                    if i == 0 {
                        lo
                    } else if i == count - 1 {
                        hi
                    } else {
                        lo * (ratio * i as f64 / (count - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

/// `φ(x) = ½ xᵀ A x` with a symmetric positive semidefinite `A`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    a: DMatrix<f64>,
}

impl Quadratic {
    pub fn new(a: DMatrix<f64>) -> Self {
        assert!(a.is_square(), "quadratic form must be square");
        Self { a }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn value(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.a * x))
    }

    fn gradient(&self, x: &Vector) -> Vector {
        &self.a * x
    }
}

/// `½ xᵀAx` with spectrum log-spaced over `[lambda_min, lambda_max]` in a
/// random orthonormal basis. `L = lambda_max`, `β = lambda_min`, `φ* = 0`.
/// The start point is a standard Gaussian draw from the same seed.
pub fn make_strongly_convex_quadratic(
    dim: usize,
    lambda_min: f64,
    lambda_max: f64,
    seed: u64,
) -> Result<ProblemInstance, ProblemError> {
    if dim == 0 {
        return Err(ProblemError::InvalidParameter("dim must be positive".into()));
    }
    if !(lambda_min > 0.0 && lambda_min <= lambda_max && lambda_max.is_finite()) {
        return Err(ProblemError::InvalidSpectrum {
            lambda_min,
            lambda_max,
        });
    }
    let mut rng = rng::seeded(seed);
    let a = if lambda_min == lambda_max {
        DMatrix::identity(dim, dim) * lambda_min
    } else {
        let q = random_orthogonal(dim, &mut rng);
        let spectrum = DVector::from_vec(log_spaced(lambda_min, lambda_max, dim));
        let a = &q * DMatrix::from_diagonal(&spectrum) * q.transpose();
        (&a + a.transpose()) * 0.5
    };
    let x0 = gaussian_vector(dim, &mut rng);
    let mut problem = ProblemInstance::new(
        Arc::new(Quadratic::new(a)),
        lambda_max,
        0.0,
        FunctionClass::StronglyConvex,
        x0,
    );
    problem.strong_convexity = lambda_min;
    problem.minimizer = Some(DVector::zeros(dim));
    Ok(problem)
}

/// Rank-deficient quadratic: convex, not strongly convex, with a whole affine
/// set of minimisers. `D = 2‖x0 − x*‖` with `x*` from an exact-oracle inner
/// solve started at `x0`.
pub fn make_convex_quadratic(
    dim: usize,
    rank: usize,
    lambda_min_nonzero: f64,
    lambda_max: f64,
    seed: u64,
) -> Result<ProblemInstance, ProblemError> {
    if dim == 0 || rank == 0 || rank > dim {
        return Err(ProblemError::InvalidParameter(format!(
            "need 0 < rank <= dim, got rank={rank}, dim={dim}"
        )));
    }
    if !(lambda_min_nonzero > 0.0 && lambda_min_nonzero <= lambda_max && lambda_max.is_finite()) {
        return Err(ProblemError::InvalidSpectrum {
            lambda_min: lambda_min_nonzero,
            lambda_max,
        });
    }
    let mut rng = rng::seeded(seed);
    let q = random_orthogonal(dim, &mut rng);
    let mut spectrum = vec![0.0; dim];
    for (slot, v) in spectrum
        .iter_mut()
        .zip(log_spaced(lambda_min_nonzero, lambda_max, rank))
    {
        *slot = v;
    }
    let a = &q * DMatrix::from_diagonal(&DVector::from_vec(spectrum)) * q.transpose();
    let a = (&a + a.transpose()) * 0.5;
    let x0 = gaussian_vector(dim, &mut rng);
    let mut problem = ProblemInstance::new(
        Arc::new(Quadratic::new(a)),
        lambda_max,
        0.0,
        FunctionClass::Convex,
        x0,
    );
    problem.refresh_convex_diameter();
    Ok(problem)
}

impl ProblemInstance {
    /// Recompute `x*` (inner solve from `x0`) and `D = 2‖x0 − x*‖`.
    pub fn refresh_convex_diameter(&mut self) {
        let x_star = inner_solve(self, 1e-12, 200_000);
        let d = 2.0 * (&self.x0 - &x_star).norm();
        self.diameter = Some(d.max(f64::MIN_POSITIVE));
        self.minimizer = Some(x_star);
    }
}

/// Deterministic Armijo gradient descent with exact value and gradient,
/// used only to locate reference minimisers.
pub fn inner_solve(problem: &ProblemInstance, grad_tol: f64, max_iters: usize) -> Vector {
    let mut x = problem.x0.clone();
    let mut fx = problem.value(&x);
    let mut alpha = 1.0 / problem.lipschitz;
    for _ in 0..max_iters {
        let g = problem.gradient(&x);
        let gg = g.norm_squared();
        if gg.sqrt() <= grad_tol {
            break;
        }
        loop {
            let trial = &x - &g * alpha;
            let ft = problem.value(&trial);
            // steps up to 1/L always decrease φ; accept them even when
            // rounding hides the decrease
            if ft <= fx - 0.5 * alpha * gg || alpha <= 1.0 / problem.lipschitz {
                x = trial;
                fx = ft;
                alpha *= 2.0;
                break;
            }
            alpha *= 0.5;
        }
    }
    x
}

/// Separable nonconvex objective `Σ ½x_i² + a·cos(ω x_i)` shifted so that its
/// global minimum is attained coordinate-wise.
#[derive(Debug, Clone)]
pub struct CosineRidge {
    dim: usize,
    amplitude: f64,
    frequency: f64,
}

impl CosineRidge {
    fn scalar(&self, t: f64) -> f64 {
        0.5 * t * t + self.amplitude * (self.frequency * t).cos()
    }

    fn scalar_prime(&self, t: f64) -> f64 {
        t - self.amplitude * self.frequency * (self.frequency * t).sin()
    }

    fn scalar_second(&self, t: f64) -> f64 {
        1.0 - self.amplitude * self.frequency * self.frequency * (self.frequency * t).cos()
    }

    /// Global minimiser of the one-dimensional slice: dense scan of the
    /// interval containing every stationary point, then Newton polishing.
    fn scalar_argmin(&self) -> f64 {
        let reach = self.amplitude * self.frequency + 1.0;
        let steps = 200_000;
        let mut best = (0.0, self.scalar(0.0));
        for i in 0..=steps {
            let t = -reach + 2.0 * reach * i as f64 / steps as f64;
            let v = self.scalar(t);
            if v < best.1 {
                best = (t, v);
            }
        }
        let mut t = best.0;
        for _ in 0..50 {
            let h = self.scalar_second(t);
            if h <= 0.0 {
                break;
            }
            let next = t - self.scalar_prime(t) / h;
            if (next - t).abs() < 1e-15 {
                t = next;
                break;
            }
            t = next;
        }
        if self.scalar(t) <= best.1 {
            t
        } else {
            best.0
        }
    }
}

impl Objective for CosineRidge {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &Vector) -> f64 {
        x.iter().map(|&t| self.scalar(t)).sum()
    }

    fn gradient(&self, x: &Vector) -> Vector {
        x.map(|t| self.scalar_prime(t))
    }
}

/// Nonconvex fixture: `Σ ½x_i² + a cos(ω x_i)`. Nonconvex when `aω² > 1`;
/// `L = 1 + aω²`; `φ*` is computed exactly from the separable structure.
/// The start point is Gaussian with standard deviation 3.
pub fn make_nonconvex_cosine(
    dim: usize,
    amplitude: f64,
    frequency: f64,
    seed: u64,
) -> Result<ProblemInstance, ProblemError> {
    if dim == 0 {
        return Err(ProblemError::InvalidParameter("dim must be positive".into()));
    }
    if !(amplitude >= 0.0 && frequency > 0.0) {
        return Err(ProblemError::InvalidParameter(
            "amplitude must be >= 0 and frequency > 0".into(),
        ));
    }
    let ridge = CosineRidge {
        dim,
        amplitude,
        frequency,
    };
    let t_star = ridge.scalar_argmin();
    let phi_star = dim as f64 * ridge.scalar(t_star);
    let lipschitz = 1.0 + amplitude * frequency * frequency;
    let mut rng = rng::seeded(seed);
    let x0 = gaussian_vector(dim, &mut rng) * 3.0;
    let mut problem = ProblemInstance::new(
        Arc::new(ridge),
        lipschitz,
        phi_star,
        FunctionClass::Nonconvex,
        x0,
    );
    problem.minimizer = Some(DVector::from_element(dim, t_star));
    Ok(problem)
}

/// Finite sample set for ℓ2-regularised binary logistic regression.
///
/// Per-sample loss: `l(x, i) = ln(1 + exp(−y_i a_iᵀx)) + (λ/2)‖x‖²` with
/// labels in `{−1, +1}`. All averages fold samples in ascending index order,
/// so the full-batch oracle and the exact objective are bit-identical.
#[derive(Debug, Clone)]
pub struct ErmDataset {
    features: Vec<Vector>,
    labels: Vec<f64>,
    reg: f64,
    /// Growth-condition constants, estimated on a probe grid.
    pub m_c: f64,
    pub m_v: f64,
}

fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl ErmDataset {
    pub fn new(features: Vec<Vector>, labels: Vec<f64>, reg: f64) -> Result<Self, ProblemError> {
        if features.is_empty() || features.len() != labels.len() {
            return Err(ProblemError::InvalidParameter(
                "need matching, nonempty features and labels".into(),
            ));
        }
        let dim = features[0].len();
        if features.iter().any(|a| a.len() != dim) {
            return Err(ProblemError::InvalidParameter("ragged feature vectors".into()));
        }
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(ProblemError::InvalidParameter("labels must be ±1".into()));
        }
        Ok(Self {
            features,
            labels,
            reg,
            m_c: 0.0,
            m_v: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn regularization(&self) -> f64 {
        self.reg
    }

    pub fn loss(&self, x: &Vector, i: usize) -> f64 {
        let margin = self.labels[i] * self.features[i].dot(x);
        log1p_exp(-margin) + 0.5 * self.reg * x.norm_squared()
    }

    pub fn loss_grad(&self, x: &Vector, i: usize) -> Vector {
        let margin = self.labels[i] * self.features[i].dot(x);
        let weight = -self.labels[i] * sigmoid(-margin);
        let mut g = &self.features[i] * weight;
        g.axpy(self.reg, x, 1.0);
        g
    }

    /// Mean loss over `indices`, folded left to right.
    pub fn mean_loss(&self, x: &Vector, indices: impl IntoIterator<Item = usize>) -> Option<f64> {
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in indices {
            sum += self.loss(x, i);
            count += 1;
        }
        (count > 0).then(|| sum / count as f64)
    }

    pub fn mean_grad(
        &self,
        x: &Vector,
        indices: impl IntoIterator<Item = usize>,
    ) -> Option<Vector> {
        let mut sum = DVector::zeros(self.dim());
        let mut count = 0usize;
        for i in indices {
            sum += self.loss_grad(x, i);
            count += 1;
        }
        (count > 0).then(|| sum / count as f64)
    }

    /// Mean over samples of `‖∇l(x,d) − ∇φ(x)‖²`.
    pub fn gradient_variance(&self, x: &Vector) -> f64 {
        let full = self.mean_grad(x, 0..self.len()).expect("nonempty dataset");
        let total: f64 = (0..self.len())
            .map(|i| (self.loss_grad(x, i) - &full).norm_squared())
            .sum();
        total / self.len() as f64
    }

    /// Range of per-sample losses at `x`.
    pub fn loss_range(&self, x: &Vector) -> (f64, f64) {
        (0..self.len())
            .map(|i| self.loss(x, i))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    }

    fn hessian(&self, x: &Vector) -> DMatrix<f64> {
        let dim = self.dim();
        let mut h = DMatrix::zeros(dim, dim);
        for (a, &y) in self.features.iter().zip(&self.labels) {
            let s = sigmoid(y * a.dot(x));
            let w = s * (1.0 - s);
            h.ger(w, a, a, 1.0);
        }
        h /= self.len() as f64;
        for i in 0..dim {
            h[(i, i)] += self.reg;
        }
        h
    }

    /// `‖A‖₂² / (4n) + λ`, an upper bound on the Hessian spectrum.
    pub fn lipschitz_bound(&self) -> f64 {
        let dim = self.dim();
        let mut gram = DMatrix::zeros(dim, dim);
        for a in &self.features {
            gram.ger(1.0, a, a, 1.0);
        }
        let top = gram
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(0.0_f64, f64::max);
        top / (4.0 * self.len() as f64) + self.reg
    }
}

/// `φ(x) = (1/n) Σ_i l(x, i)` over a whole [`ErmDataset`].
#[derive(Debug, Clone)]
pub struct LogisticObjective {
    data: Arc<ErmDataset>,
}

impl LogisticObjective {
    pub fn new(data: Arc<ErmDataset>) -> Self {
        Self { data }
    }
}

impl Objective for LogisticObjective {
    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn value(&self, x: &Vector) -> f64 {
        self.data.mean_loss(x, 0..self.data.len()).expect("nonempty dataset")
    }

    fn gradient(&self, x: &Vector) -> Vector {
        self.data.mean_grad(x, 0..self.data.len()).expect("nonempty dataset")
    }
}

/// Damped Newton iteration for the regularised logistic objective.
fn logistic_minimizer(data: &ErmDataset) -> Vector {
    let obj = LogisticObjective::new(Arc::new(data.clone()));
    let mut x = DVector::zeros(data.dim());
    let mut fx = obj.value(&x);
    for _ in 0..100 {
        let g = obj.gradient(&x);
        if g.norm() <= 1e-13 {
            break;
        }
        let Some(chol) = data.hessian(&x).cholesky() else {
            break;
        };
        let step = chol.solve(&g);
        let decrement = g.dot(&step);
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-12 {
            let trial = &x - &step * t;
            let ft = obj.value(&trial);
            if ft <= fx - 0.25 * t * decrement {
                x = trial;
                fx = ft;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    x
}

/// Number of probe points used for the growth-condition estimate.
pub const GROWTH_PROBES: usize = 100;
/// Radius of the probe ball around `x0`.
pub const GROWTH_PROBE_RADIUS: f64 = 3.0;

/// Regularisation coefficient of the synthetic logistic fixture.
pub const LOGISTIC_REG: f64 = 1e-3;

/// Points drawn uniformly from the ball of radius [`GROWTH_PROBE_RADIUS`]
/// around `center`; the first probe is `center` itself.
pub fn probe_points(center: &Vector, count: usize, seed: u64) -> Vec<Vector> {
    let mut rng = rng::seeded(seed);
    let dim = center.len();
    let mut out = Vec::with_capacity(count);
    if count > 0 {
        out.push(center.clone());
    }
    while out.len() < count {
        let dir = gaussian_vector(dim, &mut rng);
        let norm = dir.norm();
        if norm == 0.0 {
            continue;
        }
        let u: f64 = rng.random();
        let radius = GROWTH_PROBE_RADIUS * u.powf(1.0 / dim as f64);
        out.push(center + dir * (radius / norm));
    }
    out
}

/// Upper envelope `M_c + M_v‖∇φ‖²` of the per-sample gradient variance over
/// the probe points. `M_c` is the variance at the probe with the smallest
/// gradient; `M_v` is the smallest slope covering every other probe.
pub fn estimate_growth_constants(data: &ErmDataset, probes: &[Vector]) -> (f64, f64) {
    let obj = LogisticObjective::new(Arc::new(data.clone()));
    let pairs: Vec<(f64, f64)> = probes
        .iter()
        .map(|x| (data.gradient_variance(x), obj.gradient(x).norm_squared()))
        .collect();
    let Some(&(m_c, _)) = pairs
        .iter()
        .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite gradient norms"))
    else {
        return (0.0, 0.0);
    };
    let m_v = pairs
        .iter()
        .filter(|(_, g)| *g > 0.0)
        .map(|&(v, g)| ((v - m_c) / g).max(0.0))
        .fold(0.0, f64::max);
    (m_c.max(0.0), m_v)
}

fn unit_row(a: Vector) -> Vector {
    let n = a.norm();
    if n > 0.0 {
        a / n
    } else {
        a
    }
}

/// Synthetic ℓ2-regularised logistic regression.
///
/// Feature rows are uniform on the unit sphere, labels are drawn from a
/// logistic model with a random ground-truth weight vector (so the data is
/// not separable), and `x0` is standard Gaussian. The problem is strongly convex with
/// `β = λ`; `φ*` comes from a damped Newton solve.
pub fn make_synthetic_logistic(
    n_samples: usize,
    dim: usize,
    seed: u64,
) -> Result<(ProblemInstance, Arc<ErmDataset>), ProblemError> {
    if n_samples == 0 || dim == 0 {
        return Err(ProblemError::InvalidParameter(
            "n_samples and dim must be positive".into(),
        ));
    }
    let mut rng = rng::seeded(seed);
    let truth = gaussian_vector(dim, &mut rng) * 2.0;
    let mut features = Vec::with_capacity(n_samples);
    let mut labels = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let a = unit_row(gaussian_vector(dim, &mut rng));
        let p = sigmoid(a.dot(&truth));
        let u: f64 = rng.random();
        labels.push(if u < p { 1.0 } else { -1.0 });
        features.push(a);
    }
    let x0 = gaussian_vector(dim, &mut rng);
    let mut data = ErmDataset::new(features, labels, LOGISTIC_REG)?;
    let probes = probe_points(&x0, GROWTH_PROBES, seed ^ 0x9e37_79b9_7f4a_7c15);
    let (m_c, m_v) = estimate_growth_constants(&data, &probes);
    data.m_c = m_c;
    data.m_v = m_v;
    let x_star = logistic_minimizer(&data);
    let data = Arc::new(data);
    let objective = LogisticObjective::new(data.clone());
    let phi_star = objective.value(&x_star);
    let mut problem = ProblemInstance::new(
        Arc::new(objective),
        data.lipschitz_bound(),
        phi_star,
        FunctionClass::StronglyConvex,
        x0,
    );
    problem.strong_convexity = LOGISTIC_REG;
    problem.minimizer = Some(x_star);
    Ok((problem, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    fn central_difference(problem: &ProblemInstance, x: &Vector, h: f64) -> Vector {
        DVector::from_fn(x.len(), |i, _| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            (problem.value(&xp) - problem.value(&xm)) / (2.0 * h)
        })
    }

    #[test]
    fn unit_quadratic_values() {
        let p = make_strongly_convex_quadratic(2, 1.0, 1.0, 0).unwrap();
        assert_eq!(p.eval_value(&dvector![0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(p.eval_value(&dvector![3.0, 4.0]).unwrap(), 12.5);
        assert_eq!(p.eval_gradient(&dvector![3.0, 4.0]).unwrap(), dvector![3.0, 4.0]);
        assert_eq!(p.lipschitz, 1.0);
        assert_eq!(p.strong_convexity, 1.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let p = make_strongly_convex_quadratic(3, 1.0, 2.0, 0).unwrap();
        assert_eq!(
            p.eval_value(&dvector![1.0]),
            Err(ProblemError::DimensionMismatch { expected: 3, got: 1 })
        );
        assert!(p.eval_gradient(&dvector![1.0, 2.0]).is_err());
    }

    #[test]
    fn invalid_spectrum_rejected() {
        assert!(matches!(
            make_strongly_convex_quadratic(3, 2.0, 1.0, 0),
            Err(ProblemError::InvalidSpectrum { .. })
        ));
        assert!(make_strongly_convex_quadratic(3, 0.0, 1.0, 0).is_err());
    }

    #[test]
    fn quadratic_spectrum_within_bounds() {
        for seed in 0..5 {
            let p = make_strongly_convex_quadratic(10, 0.1, 10.0, seed).unwrap();
            let a = DMatrix::from_fn(10, 10, |i, j| {
                let mut e = DVector::zeros(10);
                e[j] = 1.0;
                p.gradient(&e)[i]
            });
            let eig = a.symmetric_eigenvalues();
            for &l in eig.iter() {
                assert!(l >= 0.1 - 1e-10 && l <= 10.0 + 1e-10, "eigenvalue {l}");
            }
            let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = eig.iter().cloned().fold(0.0, f64::max);
            assert_relative_eq!(min, 0.1, epsilon = 1e-9);
            assert_relative_eq!(max, 10.0, epsilon = 1e-9);
            assert_eq!(p.eval_value(&DVector::zeros(10)).unwrap(), 0.0);
            assert_eq!(p.gradient(&DVector::zeros(10)).norm(), 0.0);
        }
    }

    #[test]
    fn fixtures_match_central_differences() {
        let (logistic, _) = make_synthetic_logistic(200, 5, 3).unwrap();
        let problems = [
            make_strongly_convex_quadratic(10, 0.1, 10.0, 1).unwrap(),
            make_convex_quadratic(8, 5, 0.5, 4.0, 2).unwrap(),
            make_nonconvex_cosine(6, 1.0, 2.0, 3).unwrap(),
            logistic,
        ];
        let mut rng = rng::seeded(11);
        for p in &problems {
            for _ in 0..100 {
                let x = gaussian_vector(p.dim(), &mut rng);
                let g = p.gradient(&x);
                let fd = central_difference(p, &x, 1e-6);
                let rel = (&g - &fd).norm() / g.norm().max(1.0);
                assert!(rel <= 1e-4, "relative error {rel}");
            }
        }
    }

    #[test]
    fn minimisers_are_stationary() {
        let (logistic, _) = make_synthetic_logistic(300, 4, 5).unwrap();
        let q = make_strongly_convex_quadratic(10, 0.1, 10.0, 1).unwrap();
        let c = make_nonconvex_cosine(4, 1.0, 2.0, 3).unwrap();
        let cq = make_convex_quadratic(6, 3, 0.5, 4.0, 2).unwrap();
        for p in [&q, &c, &logistic] {
            let xs = p.minimizer.clone().unwrap();
            assert!(p.gradient(&xs).norm() <= 1e-12, "gradient {}", p.gradient(&xs).norm());
            assert!((p.value(&xs) - p.phi_star).abs() <= 1e-12);
        }
        let xs = cq.minimizer.clone().unwrap();
        assert!(cq.gradient(&xs).norm() <= 1e-11);
        assert!(cq.value(&xs).abs() <= 1e-12);
        assert!(cq.diameter.unwrap() > 0.0);
    }

    #[test]
    fn values_bounded_below_by_phi_star() {
        let c = make_nonconvex_cosine(3, 1.5, 2.0, 9).unwrap();
        let mut rng = rng::seeded(1);
        for _ in 0..2000 {
            let x = gaussian_vector(3, &mut rng) * 4.0;
            assert!(c.value(&x) >= c.phi_star - 1e-12);
        }
    }

    #[test]
    fn cosine_gradient_is_lipschitz() {
        let c = make_nonconvex_cosine(5, 1.0, 2.0, 4).unwrap();
        let mut rng = rng::seeded(2);
        for _ in 0..1000 {
            let x = gaussian_vector(5, &mut rng) * 3.0;
            let y = &x + gaussian_vector(5, &mut rng) * 0.3;
            let lhs = (c.gradient(&x) - c.gradient(&y)).norm();
            assert!(lhs <= c.lipschitz * (&x - &y).norm() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn pl_inequality_on_quadratic() {
        let p = make_strongly_convex_quadratic(10, 0.1, 10.0, 8).unwrap();
        let mut rng = rng::seeded(3);
        for _ in 0..500 {
            let x = gaussian_vector(10, &mut rng);
            let lhs = p.gradient(&x).norm_squared();
            let rhs = 2.0 * p.strong_convexity * (p.value(&x) - p.phi_star);
            assert!(lhs >= rhs * (1.0 - 1e-12));
        }
    }

    #[test]
    fn logistic_value_is_mean_of_losses() {
        let (p, data) = make_synthetic_logistic(50, 3, 1).unwrap();
        let x = p.x0.clone();
        let brute: f64 = (0..50).map(|i| data.loss(&x, i)).sum::<f64>() / 50.0;
        assert_eq!(p.value(&x), brute);
        let mut g = DVector::zeros(3);
        for i in 0..50 {
            g += data.loss_grad(&x, i);
        }
        assert_eq!(p.gradient(&x), g / 50.0);
    }

    #[test]
    fn single_sample_dataset() {
        let (p, data) = make_synthetic_logistic(1, 2, 4).unwrap();
        let x = dvector![0.3, -1.2];
        assert_eq!(data.mean_loss(&x, [0]).unwrap(), p.value(&x));
        assert_eq!(data.gradient_variance(&x), 0.0);
    }

    #[test]
    fn growth_constants_cover_probes() {
        let (p, data) = make_synthetic_logistic(400, 4, 6).unwrap();
        assert!(data.m_c >= 0.0 && data.m_v >= 0.0);
        let probes = probe_points(&p.x0, GROWTH_PROBES, 6 ^ 0x9e37_79b9_7f4a_7c15);
        for x in &probes {
            let v = data.gradient_variance(x);
            let g = p.gradient(x).norm_squared();
            assert!(v <= data.m_c + data.m_v * g + 1e-12);
        }
        assert!(data.lipschitz_bound() > LOGISTIC_REG);
    }
}
