//! Adaptive line search with probabilistic zeroth- and first-order oracles.
//!
//! The crate is organised around the life cycle of one experiment:
//!
//! - [`problem`]: instrumented objectives with known constants (L, β, D, φ*).
//! - [`oracle`]: noisy value/gradient oracles (synthetic, mini-batch, Gaussian
//!   smoothed finite differences) and their sample-size formulas.
//! - [`aloe`]: the line-search loop itself, producing a [`aloe::Trace`].
//! - [`instrumentation`]: post-hoc classification of iterations, progress
//!   measures and stopping times.
//! - [`theory`]: closed-form constants and tail bounds for the iteration
//!   complexity.
//! - [`harness`]: many-trial Monte-Carlo driver, path-lemma verification and
//!   statistical oracle certification.
//! - [`estimator`]: the practical ε_f estimator used when the oracle noise
//!   level is unknown.
//! - [`config`] and [`runner`]: the command-line surface.

pub mod aloe;
pub mod config;
pub mod estimator;
pub mod harness;
pub mod instrumentation;
pub mod oracle;
pub mod problem;
pub mod rng;
pub mod runner;
pub mod stats;
pub mod theory;

pub use aloe::{aloe_run, AloeError, AloeParams, IterationRecord, Trace};
pub use problem::{FunctionClass, ProblemInstance, Vector};
