//! Closed-form complexity constants and tail bounds.
//!
//! Everything here is a pure function of the problem constants
//! (`L`, `β`, `D`, `φ(x0) − φ*`), the oracle constants
//! (`ε_f`, `ν`, `b`, `u`, `ε_g`, `κ`, `δ`) and the line-search parameters.
//! [`TheoryConstants::compute`] assembles them into the quantities the tail
//! bound needs: the step threshold `ᾱ` (and its snapped value on the realised
//! step-size grid), the per-iteration progress `h(ᾱ)` and damage
//! `r(ε_f, 2ε_f)`, the probability `p` of a true iteration, and the offset
//! `R`.

use std::f64::consts::E;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::problem::FunctionClass;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TheoryError {
    #[error("eta = {eta} outside (0, {upper})")]
    EtaOutOfRange { eta: f64, upper: f64 },
    #[error("p_hat = {p_hat} must lie below p = {p}")]
    PHatTooLarge { p_hat: f64, p: f64 },
    #[error("invalid parameter combination: {0}")]
    Invalid(String),
    #[error("theorem inapplicable for these constants: {0}")]
    Inapplicable(String),
}

/// Open upper end of the admissible `η` range, `(1−θ)/(2−θ)`.
pub fn eta_upper(theta: f64) -> f64 {
    (1.0 - theta) / (2.0 - theta)
}

/// `ᾱ = min{(1−θ)/(0.5L+κ), 2(1−2η−θ(1−η))/(L(1−η))}`.
pub fn bar_alpha(theta: f64, lipschitz: f64, kappa: f64, eta: f64) -> Result<f64, TheoryError> {
    let upper = eta_upper(theta);
    if !(eta > 0.0 && eta < upper) {
        return Err(TheoryError::EtaOutOfRange { eta, upper });
    }
    Ok(bar_alpha_unchecked(theta, lipschitz, kappa, eta))
}

fn bar_alpha_unchecked(theta: f64, lipschitz: f64, kappa: f64, eta: f64) -> f64 {
    let first = (1.0 - theta) / (0.5 * lipschitz + kappa);
    let second = 2.0 * (1.0 - 2.0 * eta - theta * (1.0 - eta)) / (lipschitz * (1.0 - eta));
    first.min(second)
}

/// Lower bound on the probability that an iteration is true.
pub fn success_prob_p(delta: f64, nu: f64, b: f64, u: f64, bounded: bool) -> f64 {
    if bounded {
        return 1.0 - delta;
    }
    1.0 - delta - (-subexp_exponent(u, nu, b)).exp()
}

/// `min{u²/(2ν²), u/(2b)}` with the conventions `x/0 = ∞` for `x > 0` and
/// `0/0 = 0`.
fn subexp_exponent(u: f64, nu: f64, b: f64) -> f64 {
    let ratio = |num: f64, den: f64| {
        if num == 0.0 {
            0.0
        } else if den == 0.0 {
            f64::INFINITY
        } else {
            num / den
        }
    };
    ratio(u * u, 2.0 * nu * nu).min(ratio(u, 2.0 * b))
}

/// Inputs of `h(α)` beyond `α` itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProgressParams {
    pub theta: f64,
    pub eps: f64,
    pub kappa: f64,
    pub alpha_max: f64,
    pub eta: f64,
    pub beta: f64,
    pub diameter: Option<f64>,
}

/// Guaranteed decrease of `Z` on a true successful iteration with step `α`.
pub fn h_of_alpha(
    class: FunctionClass,
    alpha: f64,
    q: &ProgressParams,
) -> Result<f64, TheoryError> {
    let cap = (1.0 + q.kappa * q.alpha_max).powi(2);
    match class {
        FunctionClass::Nonconvex => {
            let e2 = q.eps * q.eps;
            Ok((q.theta * e2 * alpha / cap).min(q.theta * alpha * (1.0 - q.eta).powi(2) * e2))
        }
        FunctionClass::StronglyConvex => {
            let a = alpha * q.theta * q.beta / cap;
            let b = alpha * q.beta * q.theta * (1.0 - q.eta);
            if a >= 1.0 || b >= 1.0 {
                return Err(TheoryError::Invalid(
                    "strongly convex progress: log argument is not positive".into(),
                ));
            }
            Ok((-(-a).ln_1p()).min(-(-b).ln_1p()))
        }
        FunctionClass::Convex => {
            let d = q
                .diameter
                .ok_or_else(|| TheoryError::Invalid("convex class needs a diameter D".into()))?;
            Ok(alpha * q.theta / (4.0 * d * d) * (1.0 - q.eta).powi(2).min(1.0 / cap))
        }
    }
}

/// Worst-case increase of `Z` given the realised errors `e_sum = e_k + e_k⁺`.
pub fn r_damage(class: FunctionClass, eps_f: f64, e_sum: f64, eps: f64) -> f64 {
    let raw = 2.0 * eps_f + e_sum;
    match class {
        FunctionClass::Nonconvex => raw,
        FunctionClass::StronglyConvex => (raw / eps).ln_1p(),
        FunctionClass::Convex => raw / (eps * eps),
    }
}

/// Sub-exponential parameters `(ν_r, b_r)` of `r(ε_f, e_k + e_k⁺)`.
pub fn subexp_params_r(class: FunctionClass, nu: f64, b: f64, eps: f64, eps_f: f64) -> (f64, f64) {
    match class {
        FunctionClass::Nonconvex => (2.0 * nu, 2.0 * b),
        FunctionClass::Convex => (2.0 * nu / (eps * eps), 2.0 * b / (eps * eps)),
        FunctionClass::StronglyConvex => {
            let e2 = eps * eps;
            let v = 4.0 * E * E * (2.0 * nu / e2).max(2.0 * b / e2) + 8.0 * E * eps_f;
            (v, v)
        }
    }
}

/// Constants the lower bound on `ε` depends on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub theta: f64,
    pub lipschitz: f64,
    pub kappa: f64,
    pub alpha_max: f64,
    pub eps_f: f64,
    pub eps_g: f64,
    pub p: f64,
    pub beta: f64,
    pub diameter: Option<f64>,
    /// Strongly convex class: include the extra `4ε_f` clause.
    pub with_4epsf_clause: bool,
}

/// Number of `η` values scanned by [`eps_lower_bound`].
pub const ETA_GRID: usize = 256;

/// `η_i = η_max · i/(ETA_GRID + 1)` for `i = 1..=ETA_GRID`.
pub fn eta_grid(theta: f64) -> impl Iterator<Item = f64> {
    let upper = eta_upper(theta);
    (1..=ETA_GRID).map(move |i| upper * i as f64 / (ETA_GRID + 1) as f64)
}

/// Right-hand side of the class-specific lower bound on `ε` at a fixed `η`.
/// Infinite when no `ε` satisfies it (e.g. `p ≤ ½` with `ε_f > 0`).
pub fn eps_bound_at(class: FunctionClass, c: &BoundInputs, eta: f64) -> f64 {
    let bar = bar_alpha_unchecked(c.theta, c.lipschitz, c.kappa, eta);
    let cap = 1.0 + c.kappa * c.alpha_max;
    let half = c.p - 0.5;
    match class {
        FunctionClass::Nonconvex => {
            let grad_part = c.eps_g / eta;
            let noise_part = if c.eps_f == 0.0 {
                0.0
            } else if half <= 0.0 {
                f64::INFINITY
            } else {
                let inner = ((0.5 * c.lipschitz + c.kappa) / (1.0 - c.theta)).max(
                    c.lipschitz * (1.0 - eta)
                        / (2.0 * (1.0 - 2.0 * eta - c.theta * (1.0 - eta))),
                );
                cap.max(1.0 / (1.0 - eta)) * (4.0 * c.eps_f / (c.theta * half) * inner).sqrt()
            };
            grad_part.max(noise_part)
        }
        FunctionClass::StronglyConvex => {
            let grad_part = if c.eps_g == 0.0 {
                0.0
            } else {
                c.eps_g * c.eps_g / (2.0 * c.beta * eta * eta)
            };
            let noise_part = if c.eps_f == 0.0 {
                0.0
            } else {
                let m = (1.0 / (cap * cap)).min(1.0 - eta);
                let base = 1.0 - m * c.theta * c.beta * bar;
                let denom = base.powf(0.5 - c.p) - 1.0;
                if base <= 0.0 || denom <= 0.0 {
                    f64::INFINITY
                } else {
                    4.0 * c.eps_f / denom
                }
            };
            let extra = if c.with_4epsf_clause { 4.0 * c.eps_f } else { 0.0 };
            grad_part.max(noise_part).max(extra)
        }
        FunctionClass::Convex => {
            let Some(d) = c.diameter else {
                return f64::INFINITY;
            };
            let noise_part = if c.eps_f == 0.0 {
                0.0
            } else if half <= 0.0 {
                f64::INFINITY
            } else {
                let m2 = (1.0 - eta).powi(2).min(1.0 / (cap * cap));
                (16.0 * d * d * c.eps_f / (c.theta * half * m2 * bar)).sqrt()
            };
            noise_part.max(4.0 * c.eps_f)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsBound {
    pub eps_min: f64,
    pub eta_star: f64,
    /// Convex class: the matching lower bound `ε_g/η*` on `ε₁`.
    pub eps1_min: Option<f64>,
}

/// Grid-minimise the class-specific lower bound on `ε` over `η`.
/// Ties go to the smaller `η`.
pub fn eps_lower_bound(class: FunctionClass, c: &BoundInputs) -> Result<EpsBound, TheoryError> {
    if !(c.theta > 0.0 && c.theta < 1.0) {
        return Err(TheoryError::Invalid("theta must lie in (0,1)".into()));
    }
    let mut best: Option<(f64, f64)> = None;
    for eta in eta_grid(c.theta) {
        let v = eps_bound_at(class, c, eta);
        if best.is_none_or(|(b, _)| v < b) {
            best = Some((v, eta));
        }
    }
    let (eps_min, eta_star) = best.expect("grid is nonempty");
    Ok(EpsBound {
        eps_min,
        eta_star,
        eps1_min: matches!(class, FunctionClass::Convex).then(|| c.eps_g / eta_star),
    })
}

/// `4·max{ε_g, (1+κα_max)√((L+2κ)ε_f)}`.
pub fn simplified_nonconvex_bound(
    eps_g: f64,
    kappa: f64,
    alpha_max: f64,
    lipschitz: f64,
    eps_f: f64,
) -> f64 {
    4.0 * eps_g.max((1.0 + kappa * alpha_max) * ((lipschitz + 2.0 * kappa) * eps_f).sqrt())
}

/// `exp(−(p−p̂)²t/(2p²))`.
pub fn azuma_tail(p: f64, p_hat: f64, t: f64) -> Result<f64, TheoryError> {
    if p_hat >= p {
        return Err(TheoryError::PHatTooLarge { p_hat, p });
    }
    Ok((-(p - p_hat).powi(2) * t / (2.0 * p * p)).exp())
}

/// `exp(−min{s²t/(2ν_r²), st/(2b_r)})`; 1 when `s = 0`, 0 when
/// `ν_r = b_r = 0 < s`.
pub fn bernstein_tail(s: f64, t: f64, nu_r: f64, b_r: f64) -> f64 {
    if s == 0.0 {
        return 1.0;
    }
    let quad = if nu_r == 0.0 {
        f64::INFINITY
    } else {
        s * s * t / (2.0 * nu_r * nu_r)
    };
    let lin = if b_r == 0.0 {
        f64::INFINITY
    } else {
        s * t / (2.0 * b_r)
    };
    (-quad.min(lin)).exp()
}

/// Largest `α0·γ^i` (`i ≥ 0`) not exceeding `min{ᾱ, α0}`.
pub fn grid_snap(bar_alpha: f64, alpha0: f64, gamma: f64) -> f64 {
    if bar_alpha >= alpha0 {
        return alpha0;
    }
    let mut i = ((bar_alpha / alpha0).ln() / gamma.ln()).floor().max(0.0) as i32;
    // correct for rounding in the logarithm
    while alpha0 * gamma.powi(i) > bar_alpha {
        i += 1;
    }
    while i > 0 && alpha0 * gamma.powi(i - 1) <= bar_alpha {
        i -= 1;
    }
    alpha0 * gamma.powi(i)
}

/// `d = max{−(ln α0 − ln ᾱ)/ln γ, 0}`: unsuccessful steps needed to bring
/// `α0` down to the threshold.
pub fn step_count_d(alpha0: f64, threshold: f64, gamma: f64) -> f64 {
    let d = -(alpha0.ln() - threshold.ln()) / gamma.ln();
    // snapped thresholds are exact grid points; remove log round-off
    let rounded = d.round();
    let d = if (d - rounded).abs() < 1e-9 { rounded } else { d };
    d.max(0.0)
}

/// Progress measure at a given gap `φ(x) − φ*`.
pub fn progress_z(class: FunctionClass, gap: f64, eps: f64) -> f64 {
    match class {
        FunctionClass::Nonconvex => gap,
        FunctionClass::StronglyConvex => {
            if gap <= 0.0 {
                f64::NEG_INFINITY
            } else {
                (gap / eps).ln()
            }
        }
        FunctionClass::Convex => {
            if gap <= 0.0 {
                f64::NEG_INFINITY
            } else {
                1.0 / eps - 1.0 / gap
            }
        }
    }
}

/// Everything needed to evaluate the complexity bound for one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryInputs {
    pub class: FunctionClass,
    pub theta: f64,
    pub gamma: f64,
    pub alpha0: f64,
    pub alpha_max: f64,
    pub lipschitz: f64,
    pub beta: f64,
    pub diameter: Option<f64>,
    /// `φ(x0) − φ*`.
    pub initial_gap: f64,
    pub eps_f: f64,
    pub nu: f64,
    pub b: f64,
    pub u: f64,
    pub bounded: bool,
    pub eps_g: f64,
    pub kappa: f64,
    pub delta: f64,
    pub eps: f64,
    pub eps1: Option<f64>,
}

/// Optional overrides for the free analysis parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TheoryChoices {
    pub eta: Option<f64>,
    pub s: Option<f64>,
    pub p_hat: Option<f64>,
    /// Strongly convex class: drop the extra `4ε_f` clause from the `ε` bound.
    #[serde(default)]
    pub without_4epsf_clause: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoryConstants {
    pub class: FunctionClass,
    pub eta: f64,
    pub bar_alpha: f64,
    pub bar_alpha_grid: f64,
    pub p: f64,
    pub h_at_bar: f64,
    pub r_at_2epsf: f64,
    pub d: f64,
    pub c: f64,
    /// Strongly convex class: `−ln(1 − ᾱθβ·ᾱ)` as displayed in the theorem
    /// statement, kept for comparison with `c`.
    pub c_displayed: Option<f64>,
    pub z0: f64,
    pub r_offset: f64,
    pub eps: f64,
    pub eps1: Option<f64>,
    pub eps_min: f64,
    pub eps1_min: Option<f64>,
    pub eps_min_simplified: Option<f64>,
    pub nu_r: f64,
    pub b_r: f64,
    pub u: f64,
    pub s: f64,
    pub bounded: bool,
    pub p_hat: f64,
    pub t_min: Option<u64>,
    pub gamma: f64,
    pub alpha0: f64,
}

impl TheoryConstants {
    pub fn compute(inp: &TheoryInputs, choices: &TheoryChoices) -> Result<Self, TheoryError> {
        if !(inp.theta > 0.0 && inp.theta < 1.0) {
            return Err(TheoryError::Invalid("theta must lie in (0,1)".into()));
        }
        if !(inp.gamma > 0.0 && inp.gamma < 1.0) {
            return Err(TheoryError::Invalid("gamma must lie in (0,1)".into()));
        }
        if !(inp.eps > 0.0) {
            return Err(TheoryError::Invalid("eps must be positive".into()));
        }
        let p = success_prob_p(inp.delta, inp.nu, inp.b, inp.u, inp.bounded);
        let bound_inputs = BoundInputs {
            theta: inp.theta,
            lipschitz: inp.lipschitz,
            kappa: inp.kappa,
            alpha_max: inp.alpha_max,
            eps_f: inp.eps_f,
            eps_g: inp.eps_g,
            p,
            beta: inp.beta,
            diameter: inp.diameter,
            with_4epsf_clause: !choices.without_4epsf_clause,
        };
        let grid_best = eps_lower_bound(inp.class, &bound_inputs)?;
        let eta = match choices.eta {
            Some(eta) => {
                bar_alpha(inp.theta, inp.lipschitz, inp.kappa, eta)?;
                eta
            }
            None => grid_best.eta_star,
        };
        let eps_min = eps_bound_at(inp.class, &bound_inputs, eta);
        let bar = bar_alpha_unchecked(inp.theta, inp.lipschitz, inp.kappa, eta);
        let tau = grid_snap(bar, inp.alpha0, inp.gamma);
        let (nu_r, b_r) = subexp_params_r(inp.class, inp.nu, inp.b, inp.eps, inp.eps_f);
        let z0 = progress_z(inp.class, inp.initial_gap, inp.eps);
        let mut out = Self {
            class: inp.class,
            eta,
            bar_alpha: bar,
            bar_alpha_grid: tau,
            p,
            h_at_bar: 0.0,
            r_at_2epsf: r_damage(inp.class, inp.eps_f, 2.0 * inp.eps_f, inp.eps),
            d: 0.0,
            c: 0.0,
            c_displayed: None,
            z0,
            r_offset: 0.0,
            eps: inp.eps,
            eps1: inp.eps1,
            eps_min,
            eps1_min: matches!(inp.class, FunctionClass::Convex).then(|| inp.eps_g / eta),
            eps_min_simplified: matches!(inp.class, FunctionClass::Nonconvex).then(|| {
                simplified_nonconvex_bound(inp.eps_g, inp.kappa, inp.alpha_max, inp.lipschitz, inp.eps_f)
            }),
            nu_r,
            b_r,
            u: inp.u,
            s: 0.0,
            bounded: inp.bounded,
            p_hat: f64::NAN,
            t_min: None,
            gamma: inp.gamma,
            alpha0: inp.alpha0,
        };
        let q = out.progress_params(inp);
        if matches!(inp.class, FunctionClass::StronglyConvex) {
            let arg = bar * inp.theta * inp.beta * bar;
            out.c_displayed = (arg < 1.0).then(|| -(-arg).ln_1p());
        }
        out.rebase(tau, &q, choices)?;
        Ok(out)
    }

    fn progress_params(&self, inp: &TheoryInputs) -> ProgressParams {
        ProgressParams {
            theta: inp.theta,
            eps: inp.eps,
            kappa: inp.kappa,
            alpha_max: inp.alpha_max,
            eta: self.eta,
            beta: inp.beta,
            diameter: inp.diameter,
        }
    }

    /// Recompute every threshold-dependent quantity for a new step threshold.
    fn rebase(
        &mut self,
        tau: f64,
        q: &ProgressParams,
        choices: &TheoryChoices,
    ) -> Result<(), TheoryError> {
        self.bar_alpha_grid = tau;
        self.h_at_bar = h_of_alpha(self.class, tau, q)?;
        self.c = match self.class {
            FunctionClass::Nonconvex => self.h_at_bar / (q.eps * q.eps),
            _ => self.h_at_bar,
        };
        self.d = step_count_d(self.alpha0, tau, self.gamma);
        self.r_offset = self.z0.max(0.0) / self.h_at_bar + self.d;
        let slack = self.h_at_bar * (self.p - 0.5) - self.r_at_2epsf;
        self.s = if self.bounded {
            0.0
        } else {
            choices.s.unwrap_or(0.5 * slack.max(0.0))
        };
        let lower = self.p_hat_lower();
        self.p_hat = choices.p_hat.unwrap_or(0.5 * (lower + self.p));
        self.t_min = if lower < self.p && self.p_hat > lower && self.p_hat < self.p {
            Some(((self.r_offset / (self.p_hat - lower)).ceil() as u64).max(1))
        } else {
            None
        };
        Ok(())
    }

    /// Same constants with the step threshold moved to `tau ≤ ᾱ_grid`
    /// (used when the realised step sizes leave the `α0·γ^i` grid).
    pub fn with_threshold(&self, inp: &TheoryInputs, tau: f64, choices: &TheoryChoices) -> Result<Self, TheoryError> {
        let mut out = *self;
        let q = out.progress_params(inp);
        out.rebase(tau, &q, choices)?;
        Ok(out)
    }

    /// `½ + (r(ε_f,2ε_f) + s)/h(ᾱ)`: the lower end of the admissible `p̂`
    /// interval.
    pub fn p_hat_lower(&self) -> f64 {
        0.5 + (self.r_at_2epsf + self.s) / self.h_at_bar
    }

    /// Every violated admissibility condition; empty when the theorem applies.
    pub fn admissibility_violations(&self, inp: &TheoryInputs) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.h_at_bar > 0.0) {
            out.push(format!("h(bar_alpha) = {} is not positive", self.h_at_bar));
        }
        if !(self.p > 0.5) {
            out.push(format!("p = {} must exceed 1/2", self.p));
        }
        if !(self.h_at_bar * (self.p - 0.5) > self.r_at_2epsf) {
            out.push(format!(
                "progress condition fails: h(bar_alpha)*(p-1/2) = {} <= r(eps_f,2eps_f) = {}",
                self.h_at_bar * (self.p - 0.5),
                self.r_at_2epsf
            ));
        }
        match inp.class {
            FunctionClass::Nonconvex => {
                if inp.eps < inp.eps_g / self.eta {
                    out.push(format!("eps = {} below eps_g/eta = {}", inp.eps, inp.eps_g / self.eta));
                }
            }
            FunctionClass::StronglyConvex => {
                if !(inp.beta > 0.0) {
                    out.push("strongly convex class needs beta > 0".into());
                } else if inp.eps_g > 0.0 {
                    let need = inp.eps_g * inp.eps_g / (2.0 * inp.beta * self.eta * self.eta);
                    if inp.eps < need {
                        out.push(format!("eps = {} below eps_g^2/(2 beta eta^2) = {need}", inp.eps));
                    }
                }
                if inp.eps < 4.0 * inp.eps_f {
                    out.push(format!("eps = {} below 4 eps_f = {}", inp.eps, 4.0 * inp.eps_f));
                }
            }
            FunctionClass::Convex => {
                if inp.diameter.is_none() {
                    out.push("convex class needs a diameter D".into());
                }
                match inp.eps1 {
                    Some(e1) if e1 > 0.0 && e1 >= inp.eps_g / self.eta => {}
                    Some(e1) => out.push(format!("eps1 = {e1} below eps_g/eta = {}", inp.eps_g / self.eta)),
                    None => out.push("convex class needs eps1".into()),
                }
                if inp.eps <= 4.0 * inp.eps_f && inp.eps_f > 0.0 {
                    out.push(format!("eps = {} not above 4 eps_f = {}", inp.eps, 4.0 * inp.eps_f));
                }
            }
        }
        if !self.bounded && self.s <= 0.0 {
            out.push("sub-exponential noise needs s > 0".into());
        }
        if self.t_min.is_none() {
            out.push(format!(
                "empty p_hat interval ({}, {}) or p_hat = {} outside it",
                self.p_hat_lower(),
                self.p,
                self.p_hat
            ));
        }
        out
    }

    /// Lower bound on `P(T_ε ≤ t)`, using the smallest admissible `p̂` for
    /// this `t`. Zero where the theorem says nothing.
    pub fn tail_bound(&self, t: u64) -> f64 {
        if t == 0 {
            return 0.0;
        }
        let tf = t as f64;
        let p_hat = self.p_hat_lower() + self.r_offset / tf;
        if !(p_hat < self.p) || !(self.h_at_bar > 0.0) {
            return 0.0;
        }
        let azuma = azuma_tail(self.p, p_hat, tf).unwrap_or(1.0);
        let bern = if self.bounded {
            0.0
        } else {
            bernstein_tail(self.s, tf, self.nu_r, self.b_r)
        };
        (1.0 - azuma - bern).max(0.0)
    }

    /// Lower bound at `t` with the configured (fixed) `p̂`; zero below `t_min`.
    pub fn tail_bound_fixed(&self, t: u64) -> f64 {
        match self.t_min {
            Some(tm) if t >= tm => {
                let tf = t as f64;
                let azuma = azuma_tail(self.p, self.p_hat, tf).unwrap_or(1.0);
                let bern = if self.bounded {
                    0.0
                } else {
                    bernstein_tail(self.s, tf, self.nu_r, self.b_r)
                };
                (1.0 - azuma - bern).max(0.0)
            }
            _ => 0.0,
        }
    }

    /// `key = value` report, one constant per line.
    pub fn report(&self) -> String {
        let mut s = String::new();
        let opt = |v: Option<f64>| v.map_or("none".to_string(), |x| x.to_string());
        let _ = writeln!(s, "class = {}", self.class);
        let _ = writeln!(s, "eta = {}", self.eta);
        let _ = writeln!(s, "bar_alpha = {}", self.bar_alpha);
        let _ = writeln!(s, "bar_alpha_grid = {}", self.bar_alpha_grid);
        let _ = writeln!(s, "p = {}", self.p);
        let _ = writeln!(s, "h_at_bar = {}", self.h_at_bar);
        let _ = writeln!(s, "r_at_2epsf = {}", self.r_at_2epsf);
        let _ = writeln!(s, "d = {}", self.d);
        let _ = writeln!(s, "C = {}", self.c);
        let _ = writeln!(s, "C_displayed = {}", opt(self.c_displayed));
        let _ = writeln!(s, "Z0 = {}", self.z0);
        let _ = writeln!(s, "R = {}", self.r_offset);
        let _ = writeln!(s, "eps = {}", self.eps);
        let _ = writeln!(s, "eps1 = {}", opt(self.eps1));
        let _ = writeln!(s, "eps_min = {}", self.eps_min);
        let _ = writeln!(s, "eps1_min = {}", opt(self.eps1_min));
        let _ = writeln!(s, "eps_min_simplified = {}", opt(self.eps_min_simplified));
        let _ = writeln!(s, "nu_r = {}", self.nu_r);
        let _ = writeln!(s, "b_r = {}", self.b_r);
        let _ = writeln!(s, "u = {}", self.u);
        let _ = writeln!(s, "s = {}", self.s);
        let _ = writeln!(s, "bounded = {}", self.bounded);
        let _ = writeln!(s, "p_hat = {}", self.p_hat);
        let _ = writeln!(
            s,
            "t_min = {}",
            self.t_min.map_or("none".to_string(), |t| t.to_string())
        );
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn bar_alpha_examples() {
        let v = bar_alpha(0.5, 1.0, 1.0, 0.1).unwrap();
        assert_relative_eq!(v, 1.0 / 3.0, epsilon = 1e-15);
        assert!(bar_alpha(0.5, 1.0, 1.0, 0.4).is_err());
        let near = bar_alpha(0.5, 1.0, 1.0, eta_upper(0.5) * (1.0 - 1e-9)).unwrap();
        assert!(near < 1e-8);
        let classical = bar_alpha(1e-9, 3.0, 0.0, 1e-9).unwrap();
        assert_relative_eq!(classical, 2.0 / 3.0, epsilon = 1e-8);
    }

    #[test]
    fn success_prob_examples() {
        assert_relative_eq!(success_prob_p(0.1, 0.0, 0.0, 0.0, true), 0.9);
        assert_eq!(success_prob_p(0.0, 1.0, 1.0, 0.0, false), 0.0);
        let p = success_prob_p(0.05, 0.1, 0.1, 0.05, false);
        assert_relative_eq!(p, 0.95 - (-0.125f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(p, 0.0675, epsilon = 1e-4);
    }

    fn q(eps: f64, eta: f64) -> ProgressParams {
        ProgressParams {
            theta: 0.2,
            eps,
            kappa: 100.0,
            alpha_max: 100.0,
            eta,
            beta: 0.5,
            diameter: Some(2.0),
        }
    }

    #[test]
    fn h_examples() {
        let p = q(1.0, 0.1);
        let h = h_of_alpha(FunctionClass::Nonconvex, 1.0, &p).unwrap();
        assert_relative_eq!(h, 0.2 * 1.0 / (1.0 + 1e4f64).powi(2), epsilon = 1e-20);
        let p_small_cap = ProgressParams { kappa: 0.0, ..p };
        let h = h_of_alpha(FunctionClass::Nonconvex, 1.0, &p_small_cap).unwrap();
        assert_relative_eq!(h, 0.2 * 0.81, epsilon = 1e-15);
        for class in [FunctionClass::Nonconvex, FunctionClass::Convex, FunctionClass::StronglyConvex] {
            assert_eq!(h_of_alpha(class, 0.0, &p).unwrap(), 0.0);
        }
        let sc = ProgressParams {
            kappa: 0.0,
            theta: 0.5,
            beta: 1.0,
            eta: 0.2,
            ..p
        };
        let alpha = (1.0 - (-1.0f64).exp()) / (0.5 * 0.8);
        let a = alpha * 0.5 * 1.0;
        assert!(a < 1.0);
        let h = h_of_alpha(FunctionClass::StronglyConvex, alpha, &sc).unwrap();
        assert_relative_eq!(h, 1.0f64.min(-(1.0 - a).ln()), epsilon = 1e-12);
        let bad = ProgressParams { beta: 100.0, ..sc };
        assert!(h_of_alpha(FunctionClass::StronglyConvex, 1.0, &bad).is_err());
    }

    #[test]
    fn r_examples() {
        assert_eq!(r_damage(FunctionClass::Nonconvex, 0.1, 0.2, 1.0), 0.4);
        for class in [FunctionClass::Nonconvex, FunctionClass::Convex, FunctionClass::StronglyConvex] {
            assert_eq!(r_damage(class, 0.0, 0.0, 0.3), 0.0);
        }
        let eps = 0.5;
        let e_sum = (E - 1.0) * eps;
        assert_relative_eq!(r_damage(FunctionClass::StronglyConvex, 0.0, e_sum, eps), 1.0, epsilon = 1e-15);
        assert_relative_eq!(r_damage(FunctionClass::Convex, 0.1, 0.2, 0.5), 1.6, epsilon = 1e-15);
    }

    #[test]
    fn subexp_r_examples() {
        assert_eq!(subexp_params_r(FunctionClass::Nonconvex, 0.0, 0.0, 1.0, 0.1), (0.0, 0.0));
        let (nu_r, _) = subexp_params_r(FunctionClass::Convex, 1.0, 0.0, 0.1, 0.0);
        assert_relative_eq!(nu_r, 200.0, epsilon = 1e-10);
        let (a, b) = subexp_params_r(FunctionClass::StronglyConvex, 0.1, 0.2, 0.5, 0.01);
        assert_eq!(a, b);
        assert_relative_eq!(a, 4.0 * E * E * 1.6 + 8.0 * E * 0.01, epsilon = 1e-12);
    }

    fn inputs(eps_f: f64, eps_g: f64, p: f64) -> BoundInputs {
        BoundInputs {
            theta: 0.2,
            lipschitz: 10.0,
            kappa: 1.0,
            alpha_max: 1.0,
            eps_f,
            eps_g,
            p,
            beta: 0.1,
            diameter: Some(5.0),
            with_4epsf_clause: true,
        }
    }

    #[test]
    fn exact_limit_bounds_vanish() {
        for class in [FunctionClass::Nonconvex, FunctionClass::Convex, FunctionClass::StronglyConvex] {
            let b = eps_lower_bound(class, &inputs(0.0, 0.0, 1.0)).unwrap();
            assert_eq!(b.eps_min, 0.0);
        }
        assert_eq!(simplified_nonconvex_bound(0.5, 3.0, 1.0, 1.0, 0.0), 2.0);
    }

    #[test]
    fn grid_minimum_dominates_fixed_eta() {
        let c = inputs(1e-3, 0.01, 0.9);
        for class in [FunctionClass::Nonconvex, FunctionClass::Convex, FunctionClass::StronglyConvex] {
            let b = eps_lower_bound(class, &c).unwrap();
            assert!(b.eps_min <= eps_bound_at(class, &c, 0.1));
            assert!(b.eta_star > 0.0 && b.eta_star < eta_upper(0.2));
        }
    }

    /// Independent transcription of the nonconvex bound at one η.
    fn nonconvex_reference(c: &BoundInputs, eta: f64) -> f64 {
        let t1 = c.eps_g / eta;
        let f1 = (1.0 + c.kappa * c.alpha_max).max(1.0 / (1.0 - eta));
        let g1 = (0.5 * c.lipschitz + c.kappa) / (1.0 - c.theta);
        let g2 = c.lipschitz * (1.0 - eta) / (2.0 * (1.0 - 2.0 * eta - c.theta * (1.0 - eta)));
        let t2 = f1 * (4.0 * c.eps_f / (c.theta * (c.p - 0.5)) * g1.max(g2)).sqrt();
        t1.max(t2)
    }

    #[test]
    fn nonconvex_bound_matches_reference() {
        let c = inputs(1e-3, 0.05, 0.9);
        for eta in eta_grid(0.2) {
            let ours = eps_bound_at(FunctionClass::Nonconvex, &c, eta);
            assert_relative_eq!(ours, nonconvex_reference(&c, eta), max_relative = 1e-14);
        }
    }

    #[test]
    fn azuma_examples() {
        assert_relative_eq!(azuma_tail(0.9, 0.8, 100.0).unwrap(), (-100.0f64 / 162.0).exp(), epsilon = 1e-15);
        assert_relative_eq!(azuma_tail(0.9, 0.8, 100.0).unwrap(), 0.5394, epsilon = 1e-4);
        assert!(azuma_tail(0.9, 0.9, 10.0).is_err());
        assert!(azuma_tail(0.9, 0.9 - 1e-12, 10.0).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn bernstein_examples() {
        assert_eq!(bernstein_tail(0.0, 10.0, 1.0, 1.0), 1.0);
        assert_relative_eq!(bernstein_tail(1.0, 2.0, 1.0, 1.0), (-1.0f64).exp(), epsilon = 1e-15);
        assert_eq!(bernstein_tail(0.1, 10.0, 0.0, 0.0), 0.0);
    }

    proptest! {
        #[test]
        fn azuma_monotone(p in 0.55f64..1.0, gap in 0.01f64..0.5, t in 1.0f64..1000.0, dt in 0.0f64..100.0) {
            let p_hat = (p - gap).max(0.0);
            let a = azuma_tail(p, p_hat, t).unwrap();
            prop_assert!(azuma_tail(p, p_hat, t + dt).unwrap() <= a);
            let lower = (p_hat - 0.01).max(0.0);
            prop_assert!(azuma_tail(p, lower, t).unwrap() <= a);
        }

        #[test]
        fn bernstein_monotone(s in 0.0f64..2.0, ds in 0.0f64..1.0, t in 1.0f64..1000.0, dt in 0.0f64..100.0,
                              nu in 0.01f64..5.0, b in 0.01f64..5.0) {
            let v = bernstein_tail(s, t, nu, b);
            prop_assert!(bernstein_tail(s + ds, t, nu, b) <= v);
            prop_assert!(bernstein_tail(s, t + dt, nu, b) <= v);
        }

        #[test]
        fn eps_min_monotone_in_noise(ef in 0.0f64..1e-2, eg in 0.0f64..0.1, shrink in 0.0f64..1.0) {
            for class in [FunctionClass::Nonconvex, FunctionClass::Convex, FunctionClass::StronglyConvex] {
                let big = eps_lower_bound(class, &inputs(ef, eg, 0.9)).unwrap().eps_min;
                let small = eps_lower_bound(class, &inputs(ef * shrink, eg * shrink, 0.9)).unwrap().eps_min;
                prop_assert!(small <= big * (1.0 + 1e-12));
            }
        }

        #[test]
        fn grid_snap_is_largest_grid_point(bar in 1e-4f64..5.0, alpha0 in 0.1f64..3.0, gamma in 0.2f64..0.95) {
            let tau = grid_snap(bar, alpha0, gamma);
            prop_assert!(tau <= bar.min(alpha0));
            prop_assert!(tau / gamma > bar.min(alpha0) || tau == alpha0);
            let i = (tau / alpha0).ln() / gamma.ln();
            prop_assert!((i - i.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn step_count_example() {
        assert_eq!(step_count_d(1.0, 0.5, 0.5), 1.0);
        assert_eq!(step_count_d(0.5, 1.0, 0.5), 0.0);
        assert_eq!(grid_snap(0.3, 1.0, 0.5), 0.25);
        assert_eq!(grid_snap(2.0, 1.0, 0.5), 1.0);
        assert_eq!(grid_snap(0.5, 1.0, 0.5), 0.5);
    }

    fn exact_inputs(class: FunctionClass) -> TheoryInputs {
        TheoryInputs {
            class,
            theta: 0.2,
            gamma: 0.5,
            alpha0: 1.0,
            alpha_max: 2.0,
            lipschitz: 10.0,
            beta: 0.1,
            diameter: Some(10.0),
            initial_gap: 50.0,
            eps_f: 0.0,
            nu: 0.0,
            b: 0.0,
            u: 0.0,
            bounded: true,
            eps_g: 0.0,
            kappa: 0.0,
            delta: 0.0,
            eps: 1e-3,
            eps1: Some(1e-3),
        }
    }

    #[test]
    fn exact_oracle_consistency() {
        for class in [FunctionClass::Nonconvex, FunctionClass::Convex, FunctionClass::StronglyConvex] {
            let inp = exact_inputs(class);
            let tc = TheoryConstants::compute(&inp, &TheoryChoices { p_hat: Some(1.0 - 1e-12), ..Default::default() }).unwrap();
            assert_eq!(tc.p, 1.0);
            assert_eq!(tc.r_at_2epsf, 0.0);
            assert!(tc.admissibility_violations(&inp).is_empty(), "{:?}", tc.admissibility_violations(&inp));
            let t_min = tc.t_min.unwrap() as f64;
            assert!((t_min - (2.0 * tc.r_offset).ceil()).abs() <= 1.0);
        }
    }

    /// Independent evaluation of the nonconvex theorem for one fixture.
    #[test]
    fn nonconvex_pipeline_matches_reference() {
        let inp = TheoryInputs {
            class: FunctionClass::Nonconvex,
            eps_f: 1e-3,
            bounded: true,
            delta: 0.1,
            kappa: 1.0,
            eps: 2.0,
            u: 5e-4,
            ..exact_inputs(FunctionClass::Nonconvex)
        };
        let tc = TheoryConstants::compute(&inp, &TheoryChoices::default()).unwrap();
        assert!(tc.admissibility_violations(&inp).is_empty());
        // reference
        let eta = tc.eta;
        let bar = ((1.0f64 - 0.2) / (5.0 + 1.0)).min(2.0 * (1.0 - 2.0 * eta - 0.2 * (1.0 - eta)) / (10.0 * (1.0 - eta)));
        let mut tau = 1.0;
        while tau > bar {
            tau *= 0.5;
        }
        let c = (1.0f64 / 9.0).min((1.0 - eta).powi(2)) * tau * 0.2;
        let d = (1.0f64 / tau).log2();
        let r = 50.0 / (c * 4.0) + d;
        let lower = 0.5 + 4e-3 / (c * 4.0);
        let p_hat = 0.5 * (lower + 0.9);
        let t_min = (r / (p_hat - lower)).ceil();
        assert_relative_eq!(tc.bar_alpha, bar, max_relative = 1e-14);
        assert_eq!(tc.bar_alpha_grid, tau);
        assert_relative_eq!(tc.r_offset, r, max_relative = 1e-12);
        assert_eq!(tc.t_min.unwrap() as f64, t_min);
        let t = t_min as u64;
        let bound_fixed = 1.0 - (-(0.9 - p_hat).powi(2) * t_min / (2.0 * 0.81)).exp();
        assert_relative_eq!(tc.tail_bound_fixed(t), bound_fixed, max_relative = 1e-12);
        assert!(tc.tail_bound(t) >= tc.tail_bound_fixed(t) - 1e-15);
    }

    #[test]
    fn inadmissible_when_p_too_small() {
        let inp = TheoryInputs {
            eps_f: 1e-3,
            nu: 1e-3,
            b: 1e-3,
            u: 5e-4,
            bounded: false,
            delta: 0.1,
            kappa: 1.0,
            eps: 5.0,
            ..exact_inputs(FunctionClass::Nonconvex)
        };
        let tc = TheoryConstants::compute(&inp, &TheoryChoices::default()).unwrap();
        assert!(tc.p < 0.5);
        assert!(!tc.admissibility_violations(&inp).is_empty());
        assert_eq!(tc.tail_bound(1_000_000), 0.0);
    }

    #[test]
    fn report_lists_every_key() {
        let inp = exact_inputs(FunctionClass::StronglyConvex);
        let tc = TheoryConstants::compute(&inp, &TheoryChoices::default()).unwrap();
        let r = tc.report();
        for key in ["bar_alpha_grid", "C_displayed", "t_min", "eps_min", "nu_r", "R"] {
            assert!(r.lines().any(|l| l.starts_with(&format!("{key} = "))), "missing {key}");
        }
    }
}
