//! Experiment configuration: TOML grammar, defaults, validation and the
//! assembled [`Experiment`].
//!
//! Every key is optional. An empty file describes a 100-trial run of exact
//! oracles on the 10-dimensional strongly convex quadratic. Unknown keys are
//! rejected.
//!
//! ```toml
//! seed = 0            # trial i uses seed + i
//! trials = 100
//! budget = 1000       # iterations per trial
//! checkpoints = []    # empty: t_min, 2 t_min, 4 t_min (or the budget)
//!
//! [problem]
//! kind = "quadratic"  # quadratic | convex_quadratic | nonconvex_cosine | logistic
//! dim = 10
//! lambda_min = 0.1
//! lambda_max = 10.0
//! rank = 5            # convex_quadratic
//! amplitude = 0.5     # nonconvex_cosine
//! frequency = 1.0
//! samples = 2000      # logistic
//! seed = 0
//! class = "strongly_convex"   # analysis class; defaults by kind
//! x0_scale = 1.0
//!
//! [zeroth]
//! mode = "exact"      # exact | bounded | subexponential | minibatch
//! eps_f = 0.0
//! nu = 0.0
//! b = 0.0
//! u = 0.0             # subexponential: eps_f minus the error mean
//! batch = 128
//!
//! [first]
//! kind = "exact"      # exact | synthetic | minibatch | gsg
//! eps_g = 0.0
//! kappa = 0.0
//! delta = 0.0
//! failure_rate = 0.0  # synthetic: defaults to delta
//! batch = 128
//! sigma = 1e-3        # gsg
//! directions = 10
//!
//! [algorithm]
//! alpha0 = 1.0
//! alpha_max = 10.0
//! theta = 0.2
//! gamma = 0.8
//! eps_f = 0.0         # slack in the Armijo test; defaults to [zeroth].eps_f
//! eps_f_source = "declared"   # declared | estimated
//! eps_f_multiplier = 1.0     # scales the slack (declared or estimated)
//!
//! [stopping]
//! eps = 1e-4
//! eps1 = 1e-4         # convex class; defaults to eps_g/eta, or eps when eps_g = 0
//!
//! [theory]
//! enforce = true      # refuse to run when the constants are inadmissible
//! eta = 0.1           # default: minimiser of the eps lower bound
//! s = 0.01
//! p_hat = 0.8
//! without_4epsf_clause = false
//!
//! [estimator]
//! n_calls = 30
//! scale_factor = 0.2
//! refresh_period = 50 # default: samples/batch for logistic, 50 otherwise
//!
//! [certification]
//! enabled = false
//! required = false
//! probes = 5
//! queries = 10000
//!
//! [output]
//! traces = false
//! ```

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aloe::AloeParams;
use crate::estimator::{EstimatorConfig, DEFAULT_REFRESH_PERIOD};
use crate::instrumentation::StoppingSpec;
use crate::oracle::{FirstOracle, FirstOracleSpec, ZerothOracle, ZerothOracleSpec};
use crate::problem::{
    make_convex_quadratic, make_nonconvex_cosine, make_strongly_convex_quadratic,
    make_synthetic_logistic, ErmDataset, FunctionClass, ProblemInstance,
};
use crate::theory::{TheoryChoices, TheoryInputs};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Quadratic,
    ConvexQuadratic,
    NonconvexCosine,
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    pub dim: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub rank: usize,
    pub amplitude: f64,
    pub frequency: f64,
    pub samples: usize,
    pub seed: u64,
    pub class: Option<FunctionClass>,
    pub x0_scale: f64,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            kind: ProblemKind::Quadratic,
            dim: 10,
            lambda_min: 0.1,
            lambda_max: 10.0,
            rank: 5,
            amplitude: 0.5,
            frequency: 1.0,
            samples: 2000,
            seed: 0,
            class: None,
            x0_scale: 1.0,
        }
    }
}

impl ProblemConfig {
    pub fn class(&self) -> FunctionClass {
        self.class.unwrap_or(match self.kind {
            ProblemKind::Quadratic | ProblemKind::Logistic => FunctionClass::StronglyConvex,
            ProblemKind::ConvexQuadratic => FunctionClass::Convex,
            ProblemKind::NonconvexCosine => FunctionClass::Nonconvex,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZerothMode {
    Exact,
    Bounded,
    Subexponential,
    Minibatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZerothConfig {
    pub mode: ZerothMode,
    pub eps_f: f64,
    pub nu: f64,
    pub b: f64,
    pub u: Option<f64>,
    pub batch: usize,
}

impl Default for ZerothConfig {
    fn default() -> Self {
        Self {
            mode: ZerothMode::Exact,
            eps_f: 0.0,
            nu: 0.0,
            b: 0.0,
            u: None,
            batch: 128,
        }
    }
}

impl ZerothConfig {
    pub fn spec(&self) -> ZerothOracleSpec {
        match self.mode {
            ZerothMode::Exact => ZerothOracleSpec::exact(),
            ZerothMode::Bounded | ZerothMode::Minibatch => ZerothOracleSpec::bounded(self.eps_f),
            ZerothMode::Subexponential => ZerothOracleSpec::subexponential(
                self.eps_f,
                self.nu,
                self.b,
                self.u.unwrap_or(0.5 * self.eps_f),
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FirstKind {
    Exact,
    Synthetic,
    Minibatch,
    Gsg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FirstConfig {
    pub kind: FirstKind,
    pub eps_g: f64,
    pub kappa: f64,
    pub delta: f64,
    pub failure_rate: Option<f64>,
    pub batch: usize,
    pub sigma: f64,
    pub directions: usize,
}

impl Default for FirstConfig {
    fn default() -> Self {
        Self {
            kind: FirstKind::Exact,
            eps_g: 0.0,
            kappa: 0.0,
            delta: 0.0,
            failure_rate: None,
            batch: 128,
            sigma: 1e-3,
            directions: 10,
        }
    }
}

impl FirstConfig {
    pub fn spec(&self) -> FirstOracleSpec {
        match self.kind {
            FirstKind::Exact => FirstOracleSpec::exact(),
            _ => FirstOracleSpec {
                eps_g: self.eps_g,
                kappa: self.kappa,
                delta: self.delta,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsFSource {
    Declared,
    Estimated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub alpha0: f64,
    pub alpha_max: f64,
    pub theta: f64,
    pub gamma: f64,
    pub eps_f: Option<f64>,
    pub eps_f_source: EpsFSource,
    pub eps_f_multiplier: f64,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        let p = AloeParams::default();
        Self {
            alpha0: p.alpha0,
            alpha_max: p.alpha_max,
            theta: p.theta,
            gamma: p.gamma,
            eps_f: None,
            eps_f_source: EpsFSource::Declared,
            eps_f_multiplier: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StoppingConfig {
    pub eps: f64,
    pub eps1: Option<f64>,
}

impl Default for StoppingConfig {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            eps1: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheoryConfig {
    pub enforce: bool,
    pub eta: Option<f64>,
    pub s: Option<f64>,
    pub p_hat: Option<f64>,
    pub without_4epsf_clause: bool,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        Self {
            enforce: true,
            eta: None,
            s: None,
            p_hat: None,
            without_4epsf_clause: false,
        }
    }
}

impl TheoryConfig {
    pub fn choices(&self) -> TheoryChoices {
        TheoryChoices {
            eta: self.eta,
            s: self.s,
            p_hat: self.p_hat,
            without_4epsf_clause: self.without_4epsf_clause,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorSection {
    pub n_calls: usize,
    pub scale_factor: f64,
    pub refresh_period: Option<usize>,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        let d = EstimatorConfig::default();
        Self {
            n_calls: d.n_calls,
            scale_factor: d.scale_factor,
            refresh_period: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertificationConfig {
    pub enabled: bool,
    pub required: bool,
    pub probes: usize,
    pub queries: usize,
}

impl Default for CertificationConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            required: false,
            probes: 5,
            queries: 10_000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub traces: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub trials: usize,
    pub budget: usize,
    pub checkpoints: Vec<u64>,
    pub problem: ProblemConfig,
    pub zeroth: ZerothConfig,
    pub first: FirstConfig,
    pub algorithm: AlgorithmConfig,
    pub stopping: StoppingConfig,
    pub theory: TheoryConfig,
    pub estimator: EstimatorSection,
    pub certification: CertificationConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 100,
            budget: 1000,
            checkpoints: Vec::new(),
            problem: ProblemConfig::default(),
            zeroth: ZerothConfig::default(),
            first: FirstConfig::default(),
            algorithm: AlgorithmConfig::default(),
            stopping: StoppingConfig::default(),
            theory: TheoryConfig::default(),
            estimator: EstimatorSection::default(),
            certification: CertificationConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
    (line, column)
}

impl ExperimentConfig {
    /// Parse without semantic validation.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
            ConfigError::Parse {
                line,
                column,
                message: e.message().to_string(),
            }
        })
    }

    /// Parse and validate.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg = Self::from_toml_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serialisable")
    }

    /// SHA-256 over the canonical JSON form; changes iff a field changes.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config is always serialisable");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn aloe_params(&self) -> AloeParams {
        AloeParams {
            eps_f: self.algorithm.eps_f.unwrap_or(self.zeroth.eps_f) * self.algorithm.eps_f_multiplier,
            alpha0: self.algorithm.alpha0,
            alpha_max: self.algorithm.alpha_max,
            theta: self.algorithm.theta,
            gamma: self.algorithm.gamma,
            max_iters: self.budget,
        }
    }

    pub fn estimator_config(&self) -> EstimatorConfig {
        let refresh = self.estimator.refresh_period.unwrap_or(match self.problem.kind {
            ProblemKind::Logistic => {
                EstimatorConfig::epoch_for_dataset(self.problem.samples, self.first.batch)
            }
            _ => DEFAULT_REFRESH_PERIOD,
        });
        EstimatorConfig {
            n_calls: self.estimator.n_calls,
            scale_factor: self.estimator.scale_factor,
            refresh_period: refresh,
        }
    }

    /// Every violated constraint, in a fixed order.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.trials == 0 {
            out.push("trials must be at least 1".to_string());
        }
        out.extend(self.aloe_params().violations().into_iter().map(|v| {
            if v.starts_with("max_iters") {
                "budget must be positive".to_string()
            } else {
                v
            }
        }));
        for &t in &self.checkpoints {
            if t == 0 || t as usize > self.budget {
                out.push(format!("checkpoint {t} outside [1, budget = {}]", self.budget));
            }
        }
        let p = &self.problem;
        if p.dim == 0 {
            out.push("problem.dim must be positive".to_string());
        }
        if !(p.x0_scale.is_finite()) {
            out.push("problem.x0_scale must be finite".to_string());
        }
        match p.kind {
            ProblemKind::Quadratic | ProblemKind::ConvexQuadratic => {
                if !(p.lambda_min > 0.0 && p.lambda_min <= p.lambda_max && p.lambda_max.is_finite()) {
                    out.push("problem needs 0 < lambda_min <= lambda_max".to_string());
                }
                if p.kind == ProblemKind::ConvexQuadratic && !(p.rank >= 1 && p.rank <= p.dim) {
                    out.push("problem.rank must lie in [1, dim]".to_string());
                }
            }
            ProblemKind::NonconvexCosine => {
                if !(p.amplitude >= 0.0 && p.frequency > 0.0) {
                    out.push("problem needs amplitude >= 0 and frequency > 0".to_string());
                }
            }
            ProblemKind::Logistic => {
                if p.samples == 0 {
                    out.push("problem.samples must be positive".to_string());
                }
            }
        }
        let class = p.class();
        if class == FunctionClass::Convex && p.kind != ProblemKind::ConvexQuadratic {
            out.push("convex analysis needs a fixture with a known diameter (convex_quadratic)".to_string());
        }
        if class == FunctionClass::StronglyConvex
            && !matches!(p.kind, ProblemKind::Quadratic | ProblemKind::Logistic)
        {
            out.push("strongly convex analysis needs a strongly convex fixture".to_string());
        }
        if let Err(e) = self.zeroth.spec().validate() {
            out.push(format!("zeroth: {e}"));
        }
        if self.zeroth.mode == ZerothMode::Minibatch && p.kind != ProblemKind::Logistic {
            out.push("zeroth.mode = minibatch needs problem.kind = logistic".to_string());
        }
        if self.first.kind == FirstKind::Minibatch && p.kind != ProblemKind::Logistic {
            out.push("first.kind = minibatch needs problem.kind = logistic".to_string());
        }
        if self.zeroth.batch == 0 || self.first.batch == 0 {
            out.push("batch sizes must be positive".to_string());
        }
        if let Err(e) = self.first.spec().validate() {
            out.push(format!("first: {e}"));
        }
        if let Some(r) = self.first.failure_rate {
            if !(0.0..=1.0).contains(&r) {
                out.push("first.failure_rate must lie in [0,1]".to_string());
            }
        }
        if self.first.kind == FirstKind::Gsg && !(self.first.sigma > 0.0 && self.first.directions > 0) {
            out.push("gsg needs sigma > 0 and directions >= 1".to_string());
        }
        if !(self.algorithm.eps_f_multiplier > 0.0 && self.algorithm.eps_f_multiplier.is_finite()) {
            out.push("algorithm.eps_f_multiplier must be positive".to_string());
        }
        if !(self.stopping.eps > 0.0) {
            out.push("stopping.eps must be positive".to_string());
        }
        if let Some(e1) = self.stopping.eps1 {
            if !(e1 > 0.0) {
                out.push("stopping.eps1 must be positive".to_string());
            }
        }
        if let Some(ph) = self.theory.p_hat {
            if !(ph > 0.5 && ph < 1.0) {
                out.push("theory.p_hat must lie in (1/2, 1)".to_string());
            }
        }
        if let Some(s) = self.theory.s {
            if !(s >= 0.0) {
                out.push("theory.s must be >= 0".to_string());
            }
        }
        out.extend(self.estimator_config().violations());
        if self.certification.enabled && (self.certification.probes == 0 || self.certification.queries == 0) {
            out.push("certification needs probes >= 1 and queries >= 1".to_string());
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(v))
        }
    }

    /// Build the fixture and oracles.
    pub fn build(&self) -> Result<Experiment, ConfigError> {
        self.validate()?;
        let p = &self.problem;
        let invalid = |e: String| ConfigError::Invalid(vec![e]);
        let (problem, dataset) = match p.kind {
            ProblemKind::Quadratic => (
                make_strongly_convex_quadratic(p.dim, p.lambda_min, p.lambda_max, p.seed)
                    .map_err(|e| invalid(e.to_string()))?,
                None,
            ),
            ProblemKind::ConvexQuadratic => (
                make_convex_quadratic(p.dim, p.rank, p.lambda_min, p.lambda_max, p.seed)
                    .map_err(|e| invalid(e.to_string()))?,
                None,
            ),
            ProblemKind::NonconvexCosine => (
                make_nonconvex_cosine(p.dim, p.amplitude, p.frequency, p.seed)
                    .map_err(|e| invalid(e.to_string()))?,
                None,
            ),
            ProblemKind::Logistic => {
                let (prob, data) = make_synthetic_logistic(p.samples, p.dim, p.seed)
                    .map_err(|e| invalid(e.to_string()))?;
                (prob, Some(data))
            }
        };
        let mut problem = problem.with_class(p.class());
        if p.x0_scale != 1.0 {
            problem = problem.with_x0_scaled(p.x0_scale);
            if p.kind == ProblemKind::ConvexQuadratic {
                problem.refresh_convex_diameter();
            }
        }

        let zspec = self.zeroth.spec();
        let zeroth = match (self.zeroth.mode, &dataset) {
            (ZerothMode::Minibatch, Some(data)) => {
                ZerothOracle::minibatch(Arc::clone(data), self.zeroth.batch, zspec)
            }
            _ => ZerothOracle::synthetic(zspec),
        };
        let fspec = self.first.spec();
        let first = match (self.first.kind, &dataset) {
            (FirstKind::Exact, _) => FirstOracle::exact(),
            (FirstKind::Synthetic, _) => match self.first.failure_rate {
                Some(r) => FirstOracle::synthetic_with_failure_rate(fspec, r),
                None => FirstOracle::synthetic(fspec),
            },
            (FirstKind::Minibatch, Some(data)) => {
                FirstOracle::minibatch(Arc::clone(data), self.first.batch, fspec)
            }
            (FirstKind::Minibatch, None) => unreachable!("rejected by validation"),
            (FirstKind::Gsg, _) => {
                FirstOracle::gsg(zeroth.clone(), self.first.sigma, self.first.directions, fspec)
            }
        };
        Ok(Experiment {
            config: self.clone(),
            problem,
            dataset,
            zeroth,
            first,
            params: self.aloe_params(),
        })
    }
}

/// A validated configuration with its fixture and oracles instantiated.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub problem: ProblemInstance,
    pub dataset: Option<Arc<ErmDataset>>,
    pub zeroth: ZerothOracle,
    pub first: FirstOracle,
    pub params: AloeParams,
}

impl Experiment {
    pub fn class(&self) -> FunctionClass {
        self.problem.class
    }

    /// Inputs of the complexity bound for this experiment.
    pub fn theory_inputs(&self) -> TheoryInputs {
        let z = self.zeroth.spec;
        let f = self.first.spec;
        TheoryInputs {
            class: self.class(),
            theta: self.params.theta,
            gamma: self.params.gamma,
            alpha0: self.params.alpha0,
            alpha_max: self.params.alpha_max,
            lipschitz: self.problem.lipschitz,
            beta: self.problem.strong_convexity,
            diameter: self.problem.diameter,
            initial_gap: self.problem.initial_gap(),
            eps_f: z.eps_f,
            nu: z.nu,
            b: z.b,
            u: z.mean_slack,
            bounded: z.is_bounded(),
            eps_g: f.eps_g,
            kappa: f.kappa,
            delta: f.delta,
            eps: self.config.stopping.eps,
            eps1: self.config.stopping.eps1,
        }
    }

    /// Stopping rule, filling the convex `ε₁` default from `η`.
    pub fn stopping_spec(&self, eta: f64) -> StoppingSpec {
        let eps1 = match self.class() {
            FunctionClass::Convex => Some(self.config.stopping.eps1.unwrap_or_else(|| {
                let eg = self.first.spec.eps_g;
                if eg > 0.0 {
                    eg / eta
                } else {
                    self.config.stopping.eps
                }
            })),
            _ => self.config.stopping.eps1,
        };
        StoppingSpec {
            class: self.class(),
            eps: self.config.stopping.eps,
            eps1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let cfg = ExperimentConfig::parse("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.trials, 100);
        assert_eq!(cfg.problem.kind, ProblemKind::Quadratic);
        let p = cfg.aloe_params();
        assert_eq!((p.gamma, p.theta, p.alpha0, p.alpha_max), (0.8, 0.2, 1.0, 10.0));
    }

    #[test]
    fn gamma_out_of_range_is_rejected() {
        let err = ExperimentConfig::parse("[algorithm]\ngamma = 1.5\n").unwrap_err();
        match err {
            ConfigError::Invalid(v) => assert!(v.iter().any(|m| m == "gamma must lie in (0,1)")),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn every_violation_is_listed() {
        let err = ExperimentConfig::parse("trials = 0\n[algorithm]\ngamma = 1.5\ntheta = 0.0\n").unwrap_err();
        let ConfigError::Invalid(v) = err else { panic!() };
        assert!(v.len() >= 3, "{v:?}");
    }

    #[test]
    fn parse_error_has_position() {
        let err = ExperimentConfig::parse("trials = 5\n[algorithm]\ngamma = = 2\n").unwrap_err();
        match err {
            ConfigError::Parse { line, column, .. } => {
                assert_eq!(line, 3);
                assert!(column > 1);
            }
            other => panic!("{other}"),
        }
        let err = ExperimentConfig::parse("bogus = 1\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 1, .. }));
    }

    #[test]
    fn default_block_reproduces_line_search_parameters() {
        let text = "[algorithm]\ngamma = 0.8\ntheta = 0.2\nalpha0 = 1.0\nalpha_max = 10.0\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.digest(), ExperimentConfig::default().digest());
    }

    #[test]
    fn digest_tracks_semantic_changes() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.first.kappa = 0.5;
        assert_ne!(a.digest(), b.digest());
        let c = ExperimentConfig::parse(&a.to_toml()).unwrap();
        assert_eq!(a.digest(), c.digest());
    }

    #[test]
    fn build_every_fixture() {
        for kind in ["quadratic", "convex_quadratic", "nonconvex_cosine", "logistic"] {
            let text = format!("[problem]\nkind = \"{kind}\"\nsamples = 200\ndim = 4\nrank = 2\n");
            let exp = ExperimentConfig::parse(&text).unwrap().build().unwrap();
            assert_eq!(exp.problem.dim(), 4);
        }
    }

    #[test]
    fn minibatch_needs_dataset() {
        let err = ExperimentConfig::parse("[first]\nkind = \"minibatch\"\n").unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)));
    }

    #[test]
    fn estimator_epoch_follows_dataset() {
        let cfg = ExperimentConfig::parse("[problem]\nkind = \"logistic\"\nsamples = 2000\n[first]\nkind = \"minibatch\"\nbatch = 128\n").unwrap();
        assert_eq!(cfg.estimator_config().refresh_period, 15);
        assert_eq!(ExperimentConfig::default().estimator_config().refresh_period, 50);
    }
}
