//! Closed-form effective SABR parameters for backward-looking caplets.
//!
//! A backward-looking caplet on `R(τ1)` under the damped dynamics is quoted
//! with the ordinary Hagan formula at expiry `τ1` and constant parameters
//! `(α̂, β, ρ̂, ν̂)`. Two closed forms exist depending on whether the accrual
//! period has started (`τ0 ≤ 0`, [`effective_params_seasoned`]) or not
//! (`τ0 ≥ 0`, [`effective_params_forward`]); they coincide at `τ0 = 0`.
//!
//! The effective parameters always quote against a time to exercise, stored
//! alongside them. [`rescale_time_to_exercise`] moves them to another
//! expiry without changing Hagan prices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AccrualPeriod, DecayExponent, SabrParams};

/// Constant `(α̂, ρ̂, ν̂)` and the expiry they are quoted against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveSabrParams {
    pub alpha_hat: f64,
    pub rho_hat: f64,
    pub nu_hat: f64,
    pub time_to_exercise: f64,
}

impl EffectiveSabrParams {
    /// `α̂ > 0`, `ν̂ ≥ 0` and `|ρ̂| ≤ 1`.
    pub fn is_admissible(&self) -> bool {
        self.alpha_hat > 0.0 && self.nu_hat >= 0.0 && self.rho_hat.abs() <= 1.0
    }

    /// Standard SABR parameters with β and shift taken from `base`.
    pub fn to_sabr(&self, base: &SabrParams) -> SabrParams {
        base.with_triple(self.alpha_hat, self.rho_hat, self.nu_hat)
    }
}

/// Auxiliary quantities of the closed forms.
///
/// `tau`, `h` and `gamma` belong to the `τ0 ≥ 0` case; `zeta` to `τ0 ≤ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveIntermediates {
    /// `τ = 2qτ0 + τ1`.
    pub tau: f64,
    pub h: f64,
    pub gamma: f64,
    pub zeta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EffectiveOptions {
    /// Keep the second-order `exp(½ … τ1)` factor in `α̂`. Only the
    /// comparison against the Piterbarg adjustment switches it off.
    pub include_exp_factor: bool,
}

impl Default for EffectiveOptions {
    fn default() -> Self {
        Self {
            include_exp_factor: true,
        }
    }
}

/// `ζ = 3/(4q+3) · (1/(2q+1) + ρ² 2q/(3q+2)²)`.
pub fn zeta(q: f64, rho: f64) -> f64 {
    3.0 / (4.0 * q + 3.0) * (1.0 / (2.0 * q + 1.0) + rho * rho * 2.0 * q / (3.0 * q + 2.0).powi(2))
}

fn unchanged(p: &SabrParams, period: &AccrualPeriod) -> EffectiveSabrParams {
    EffectiveSabrParams {
        alpha_hat: p.alpha,
        rho_hat: p.rho,
        nu_hat: p.nu,
        time_to_exercise: period.tau1(),
    }
}

/// `τ`, `H`, `γ` for an unstarted period (and `ζ` for reference).
pub fn forward_intermediates(
    p: &SabrParams,
    period: &AccrualPeriod,
    q: DecayExponent,
) -> Result<EffectiveIntermediates> {
    if period.tau0() < 0.0 {
        return Err(Error::domain(format!(
            "forward-start closed form needs tau0 >= 0, got {}",
            period.tau0()
        )));
    }
    let q = q.value();
    let (t0, t1) = (period.tau0(), period.tau1());
    let (rho, nu) = (p.rho, p.nu);
    let tau = 2.0 * q * t0 + t1;
    let gamma = tau
        * (2.0 * tau.powi(3)
            + t1.powi(3)
            + (4.0 * q * q - 2.0 * q) * t0.powi(3)
            + 6.0 * q * t0 * t0 * t1)
        / ((4.0 * q + 3.0) * (2.0 * q + 1.0))
        + 3.0
            * q
            * rho
            * rho
            * (t1 - t0).powi(2)
            * (3.0 * tau * tau - t1 * t1 + 5.0 * q * t0 * t0 + 4.0 * t0 * t1)
            / ((4.0 * q + 3.0) * (3.0 * q + 2.0).powi(2));
    let nu_hat_sq = nu * nu * gamma * (2.0 * q + 1.0) / (tau.powi(3) * t1);
    let h = nu * nu * (tau * tau + 2.0 * q * t0 * t0 + t1 * t1) / (2.0 * t1 * tau * (q + 1.0))
        - nu_hat_sq;
    Ok(EffectiveIntermediates {
        tau,
        h,
        gamma,
        zeta: zeta(q, rho),
    })
}

/// Effective parameters when the accrual period has started (`τ0 ≤ 0`).
pub fn effective_params_seasoned(
    p: &SabrParams,
    period: &AccrualPeriod,
    q: DecayExponent,
) -> Result<EffectiveSabrParams> {
    effective_params_seasoned_with(p, period, q, EffectiveOptions::default())
}

pub fn effective_params_seasoned_with(
    p: &SabrParams,
    period: &AccrualPeriod,
    q: DecayExponent,
    opts: EffectiveOptions,
) -> Result<EffectiveSabrParams> {
    if period.tau0() > 0.0 {
        return Err(Error::domain(format!(
            "seasoned closed form needs tau0 <= 0, got {}",
            period.tau0()
        )));
    }
    let q = q.value();
    let (t0, t1) = (period.tau0(), period.tau1());
    let (alpha, rho, nu) = (p.alpha, p.rho, p.nu);
    let z = zeta(q, rho);
    let rho_hat = 2.0 * rho / (z.sqrt() * (3.0 * q + 2.0));
    let nu_hat_sq = nu * nu * z * (2.0 * q + 1.0);
    let mut alpha_hat_sq = alpha * alpha / (2.0 * q + 1.0) * (t1 / (t1 - t0)).powf(2.0 * q);
    if opts.include_exp_factor {
        alpha_hat_sq *= (0.5 * (nu * nu / (q + 1.0) - nu_hat_sq) * t1).exp();
    }
    Ok(EffectiveSabrParams {
        alpha_hat: alpha_hat_sq.sqrt(),
        rho_hat,
        nu_hat: nu_hat_sq.sqrt(),
        time_to_exercise: t1,
    })
}

/// Effective parameters when no fixing has happened yet (`τ0 ≥ 0`).
pub fn effective_params_forward(
    p: &SabrParams,
    period: &AccrualPeriod,
    q: DecayExponent,
) -> Result<EffectiveSabrParams> {
    effective_params_forward_with(p, period, q, EffectiveOptions::default())
}

pub fn effective_params_forward_with(
    p: &SabrParams,
    period: &AccrualPeriod,
    q: DecayExponent,
    opts: EffectiveOptions,
) -> Result<EffectiveSabrParams> {
    let m = forward_intermediates(p, period, q)?;
    if period.is_degenerate() {
        return Ok(unchanged(p, period));
    }
    let q = q.value();
    let (t0, t1) = (period.tau0(), period.tau1());
    let tau = m.tau;
    let rho_hat = p.rho * (3.0 * tau * tau + 2.0 * q * t0 * t0 + t1 * t1)
        / (m.gamma.sqrt() * (6.0 * q + 4.0));
    let nu_hat_sq = p.nu * p.nu * m.gamma * (2.0 * q + 1.0) / (tau.powi(3) * t1);
    let mut alpha_hat_sq = p.alpha * p.alpha / (2.0 * q + 1.0) * tau / t1;
    if opts.include_exp_factor {
        alpha_hat_sq *= (0.5 * m.h * t1).exp();
    }
    Ok(EffectiveSabrParams {
        alpha_hat: alpha_hat_sq.sqrt(),
        rho_hat,
        nu_hat: nu_hat_sq.sqrt(),
        time_to_exercise: t1,
    })
}

/// Dispatches on the sign of `τ0`; `τ0 = 0` uses the forward-start form.
pub fn effective_params(
    p: &SabrParams,
    period: &AccrualPeriod,
    q: DecayExponent,
) -> Result<EffectiveSabrParams> {
    effective_params_with(p, period, q, EffectiveOptions::default())
}

pub fn effective_params_with(
    p: &SabrParams,
    period: &AccrualPeriod,
    q: DecayExponent,
    opts: EffectiveOptions,
) -> Result<EffectiveSabrParams> {
    if period.tau0() < 0.0 {
        effective_params_seasoned_with(p, period, q, opts)
    } else {
        effective_params_forward_with(p, period, q, opts)
    }
}

/// Re-quotes effective parameters against expiry `new_t`: `α̂` and `ν̂` scale
/// by `√(T_old / T_new)`, `ρ̂` is unchanged.
pub fn rescale_time_to_exercise(
    e: &EffectiveSabrParams,
    new_t: f64,
) -> Result<EffectiveSabrParams> {
    if !(new_t > 0.0) || !new_t.is_finite() {
        return Err(Error::domain(format!(
            "time to exercise must be > 0, got {new_t}"
        )));
    }
    let factor = (e.time_to_exercise / new_t).sqrt();
    Ok(EffectiveSabrParams {
        alpha_hat: e.alpha_hat * factor,
        rho_hat: e.rho_hat,
        nu_hat: e.nu_hat * factor,
        time_to_exercise: new_t,
    })
}

/// Outcome of the `q → ∞` limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QLimit {
    Effective(EffectiveSabrParams),
    /// `τ0 ≤ 0`: all effective parameters vanish, the rate is deterministic.
    NoResidualVolatility {
        time_to_exercise: f64,
    },
}

/// `q → ∞`: volatility is switched off at `τ0`, so `α̂² = α²τ0/τ1`,
/// `ν̂² = ν²τ0/τ1`, `ρ̂ = ρ` (quoted at `τ1`).
pub fn limit_q_to_infinity(p: &SabrParams, period: &AccrualPeriod) -> QLimit {
    let (t0, t1) = (period.tau0(), period.tau1());
    if t0 <= 0.0 {
        return QLimit::NoResidualVolatility {
            time_to_exercise: t1,
        };
    }
    let ratio = (t0 / t1).sqrt();
    QLimit::Effective(EffectiveSabrParams {
        alpha_hat: p.alpha * ratio,
        rho_hat: p.rho,
        nu_hat: p.nu * ratio,
        time_to_exercise: t1,
    })
}

/// `q → 0`: no damping, the effective parameters are the original ones.
pub fn limit_q_to_zero(p: &SabrParams, period: &AccrualPeriod) -> EffectiveSabrParams {
    unchanged(p, period)
}

/// Maps a started period `[τ0, τ1]` onto the canonical period `[0, 1]`:
/// `α → α√τ1 (τ1/(τ1−τ0))^q`, `ν → ν√τ1`.
pub fn scaling_reparameterization(
    p: &SabrParams,
    period: &AccrualPeriod,
    q: DecayExponent,
) -> Result<SabrParams> {
    if period.tau0() > 0.0 {
        return Err(Error::domain(format!(
            "scaling property requires tau0 <= 0, got {}",
            period.tau0()
        )));
    }
    let t1 = period.tau1();
    let alpha = p.alpha * t1.sqrt() * (t1 / period.length()).powf(q.value());
    Ok(SabrParams {
        alpha,
        nu: p.nu * t1.sqrt(),
        ..*p
    })
}

/// Piterbarg's adjusted initial volatility `α√(1 + (τ1−τ0)/(3τ0))`, quoted
/// against expiry `τ0`.
pub fn piterbarg_alpha(alpha: f64, period: &AccrualPeriod) -> Result<f64> {
    let t0 = period.tau0();
    if !(t0 > 0.0) {
        return Err(Error::domain(format!(
            "Piterbarg adjustment needs tau0 > 0, got {t0}"
        )));
    }
    Ok(alpha * (1.0 + period.length() / (3.0 * t0)).sqrt())
}
