//! Estimating the noise level `ε_f` of a zeroth-order oracle from repeated
//! calls at a single point.

use serde::{Deserialize, Serialize};

use crate::oracle::ZerothOracle;
use crate::problem::{ProblemInstance, Vector};
use crate::rng::{query_stream, Purpose, Stream};
use crate::stats::sample_std;

/// Epoch length used when the problem has no dataset.
pub const DEFAULT_REFRESH_PERIOD: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub n_calls: usize,
    pub scale_factor: f64,
    pub refresh_period: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            n_calls: 30,
            scale_factor: 0.2,
            refresh_period: DEFAULT_REFRESH_PERIOD,
        }
    }
}

impl EstimatorConfig {
    /// Epoch length `n / batch` for a dataset of size `n` (at least one).
    pub fn epoch_for_dataset(n: usize, batch: usize) -> usize {
        (n / batch.max(1)).max(1)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n_calls < 2 {
            out.push("estimator n_calls must be at least 2".to_string());
        }
        if !(self.scale_factor > 0.0 && self.scale_factor.is_finite()) {
            out.push("estimator scale_factor must be positive".to_string());
        }
        if self.refresh_period == 0 {
            out.push("estimator refresh_period must be positive".to_string());
        }
        out
    }
}

/// `scale_factor × std(f_1, …, f_n)` over `n_calls` oracle values at `x`.
pub fn estimate_eps_f(
    zeroth: &ZerothOracle,
    problem: &ProblemInstance,
    x: &Vector,
    config: &EstimatorConfig,
    rng: &mut Stream,
) -> f64 {
    let values: Vec<f64> = (0..config.n_calls)
        .map(|_| zeroth.estimate(problem, x, rng))
        .collect();
    config.scale_factor * sample_std(&values)
}

/// Per-epoch `ε_f` schedule for [`crate::aloe::aloe_run_with_schedule`].
/// Estimates at the incumbent on the first iteration of every epoch, then
/// multiplies by `multiplier`. Every estimate is kept in `history`.
pub struct EpochSchedule<'a> {
    pub zeroth: &'a ZerothOracle,
    pub problem: &'a ProblemInstance,
    pub config: EstimatorConfig,
    pub seed: u64,
    pub multiplier: f64,
    pub history: Vec<f64>,
    current: f64,
}

impl<'a> EpochSchedule<'a> {
    pub fn new(
        zeroth: &'a ZerothOracle,
        problem: &'a ProblemInstance,
        config: EstimatorConfig,
        seed: u64,
        multiplier: f64,
    ) -> Self {
        Self {
            zeroth,
            problem,
            config,
            seed,
            multiplier,
            history: Vec::new(),
            current: 0.0,
        }
    }

    pub fn eps_f_at(&mut self, k: usize, x: &Vector) -> f64 {
        if k % self.config.refresh_period == 0 {
            let mut rng = query_stream(self.seed, k as u64, Purpose::EpsEstimate);
            let est = estimate_eps_f(self.zeroth, self.problem, x, &self.config, &mut rng);
            self.history.push(est);
            self.current = est * self.multiplier;
        }
        self.current
    }
}
