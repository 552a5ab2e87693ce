//! Effective-medium integrals for a SABR model with a deterministic
//! volatility scale `φ(t) = α ψ(t)`, evaluated by quadrature.
//!
//! With `v(u) = ∫₀ᵘ φ²`, `w(u) = ρν ∫₀ᵘ φ` and expiry `T = τ1`:
//!
//! ```text
//! Δ² = v(T)/T
//! b  = 2ρν/v(T)² ∫ (v(T) − v(s)) φ(s) ds
//! c  = 3ν²/v(T)³ ∫ (v(T) − v(s))² ds + 9/v(T)³ ∫ w(s)² φ(s)² ds − 3b²
//! G  = 2ν²/v(T)² ∫ (v(T) − v(s)) ds − c
//! α̂ = Δ exp(¼ Δ² G T),  ρ̂ = b/√c,  ν̂ = Δ √c
//! ```
//!
//! Nothing here depends on [`crate::effective`]: the module exists to check
//! those closed forms independently.

use std::cell::RefCell;

use crate::effective::EffectiveSabrParams;
use crate::error::{Error, Result};
use crate::model::{psi_unchecked, AccrualPeriod, DecayExponent, SabrParams};
use crate::quadrature::{integrate, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveMediumIntegrals {
    pub v_of_t: f64,
    pub b: f64,
    pub c: f64,
    pub delta_sq: f64,
    pub g: f64,
}

/// How `v(s)` and `w(s)` are obtained inside the outer integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InnerIntegrals {
    /// Piecewise antiderivatives of `φ²` and `φ`.
    #[default]
    ClosedForm,
    /// Nested quadrature; slower, shares nothing with the closed forms.
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub inner: InnerIntegrals,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            inner: InnerIntegrals::ClosedForm,
            abs_tol: 0.0,
            rel_tol: 1e-14,
        }
    }
}

impl OracleOptions {
    fn tolerance(&self) -> Tolerance {
        Tolerance {
            abs: self.abs_tol,
            rel: self.rel_tol,
        }
    }
}

struct Setup<'a> {
    p: &'a SabrParams,
    period: &'a AccrualPeriod,
    q: f64,
    breaks: Vec<f64>,
}

impl<'a> Setup<'a> {
    fn new(p: &'a SabrParams, period: &'a AccrualPeriod, q: DecayExponent) -> Self {
        let t0 = period.tau0();
        let breaks = if t0 > 0.0 && t0 < period.tau1() {
            vec![t0]
        } else {
            Vec::new()
        };
        Self {
            p,
            period,
            q: q.value(),
            breaks,
        }
    }

    fn phi(&self, t: f64) -> f64 {
        self.p.alpha * psi_unchecked(t, self.period, self.q)
    }
}

fn check_horizon(u: f64, period: &AccrualPeriod) -> Result<()> {
    if !(0.0..=period.tau1()).contains(&u) {
        return Err(Error::domain(format!(
            "integration horizon u={u} outside [0, tau1={}]",
            period.tau1()
        )));
    }
    Ok(())
}

/// `v(u) = ∫₀ᵘ φ²(s) ds` by quadrature.
pub fn v(u: f64, p: &SabrParams, period: &AccrualPeriod, q: DecayExponent) -> Result<f64> {
    v_with(u, p, period, q, &OracleOptions::default())
}

/// `w(u) = ρν ∫₀ᵘ φ(s) ds` by quadrature.
pub fn w(u: f64, p: &SabrParams, period: &AccrualPeriod, q: DecayExponent) -> Result<f64> {
    w_with(u, p, period, q, &OracleOptions::default())
}

fn v_with(
    u: f64,
    p: &SabrParams,
    period: &AccrualPeriod,
    q: DecayExponent,
    opts: &OracleOptions,
) -> Result<f64> {
    check_horizon(u, period)?;
    let s = Setup::new(p, period, q);
    integrate(|t| s.phi(t).powi(2), 0.0, u, &s.breaks, opts.tolerance())
}

fn w_with(
    u: f64,
    p: &SabrParams,
    period: &AccrualPeriod,
    q: DecayExponent,
    opts: &OracleOptions,
) -> Result<f64> {
    check_horizon(u, period)?;
    let s = Setup::new(p, period, q);
    Ok(p.rho * p.nu * integrate(|t| s.phi(t), 0.0, u, &s.breaks, opts.tolerance())?)
}

/// Piecewise closed form of `v(u)`.
pub fn v_closed(u: f64, p: &SabrParams, period: &AccrualPeriod, q: DecayExponent) -> Result<f64> {
    check_horizon(u, period)?;
    let q = q.value();
    let (t0, t1, a2) = (period.tau0(), period.tau1(), p.alpha * p.alpha);
    let len = period.length();
    if period.is_degenerate() {
        return Ok(a2 * u);
    }
    if t0 < 0.0 {
        let e = 2.0 * q + 1.0;
        return Ok(a2 * (t1.powf(e) - (t1 - u).powf(e)) / (e * len.powf(2.0 * q)));
    }
    if u <= t0 {
        Ok(a2 * u)
    } else {
        let e = 2.0 * q + 1.0;
        Ok(a2 / e * (2.0 * q * t0 + t1 - (t1 - u).powf(e) / len.powf(2.0 * q)))
    }
}

/// Piecewise closed form of `w(u)`.
pub fn w_closed(u: f64, p: &SabrParams, period: &AccrualPeriod, q: DecayExponent) -> Result<f64> {
    check_horizon(u, period)?;
    let q = q.value();
    let (t0, t1) = (period.tau0(), period.tau1());
    let scale = p.rho * p.nu * p.alpha;
    let len = period.length();
    if period.is_degenerate() {
        return Ok(scale * u);
    }
    let e = q + 1.0;
    if t0 < 0.0 {
        return Ok(scale * (t1.powf(e) - (t1 - u).powf(e)) / (e * len.powf(q)));
    }
    if u <= t0 {
        Ok(scale * u)
    } else {
        Ok(scale / e * (q * t0 + t1 - (t1 - u).powf(e) / len.powf(q)))
    }
}

/// `Δ²`, `b`, `c`, `G` and `v(T)` for `T = τ1`.
pub fn effective_medium_integrals(
    p: &SabrParams,
    period: &AccrualPeriod,
    q: DecayExponent,
    opts: &OracleOptions,
) -> Result<EffectiveMediumIntegrals> {
    let s = Setup::new(p, period, q);
    let t_end = period.tau1();
    let tol = opts.tolerance();
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let record = |r: Result<f64>| -> f64 {
        r.unwrap_or_else(|e| {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        })
    };
    let v_at = |u: f64| match opts.inner {
        InnerIntegrals::ClosedForm => record(v_closed(u, p, period, q)),
        InnerIntegrals::Quadrature => record(v_with(u, p, period, q, opts)),
    };
    let w_at = |u: f64| match opts.inner {
        InnerIntegrals::ClosedForm => record(w_closed(u, p, period, q)),
        InnerIntegrals::Quadrature => record(w_with(u, p, period, q, opts)),
    };

    let vt = match opts.inner {
        InnerIntegrals::ClosedForm => v_closed(t_end, p, period, q)?,
        InnerIntegrals::Quadrature => v_with(t_end, p, period, q, opts)?,
    };
    if !(vt > 0.0) {
        return Err(Error::domain("integrated variance v(T) must be positive"));
    }
    let (rho, nu) = (p.rho, p.nu);

    let int_b = integrate(|t| (vt - v_at(t)) * s.phi(t), 0.0, t_end, &s.breaks, tol)?;
    let int_c1 = integrate(|t| (vt - v_at(t)).powi(2), 0.0, t_end, &s.breaks, tol)?;
    let int_c2 = integrate(|t| (w_at(t) * s.phi(t)).powi(2), 0.0, t_end, &s.breaks, tol)?;
    let int_g = integrate(|t| vt - v_at(t), 0.0, t_end, &s.breaks, tol)?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }

    let b = 2.0 * rho * nu / (vt * vt) * int_b;
    let c = 3.0 * nu * nu / vt.powi(3) * int_c1 + 9.0 / vt.powi(3) * int_c2 - 3.0 * b * b;
    let g = 2.0 * nu * nu / (vt * vt) * int_g - c;
    Ok(EffectiveMediumIntegrals {
        v_of_t: vt,
        b,
        c,
        delta_sq: vt / t_end,
        g,
    })
}

/// Effective parameters from the effective-medium integrals, quoted at `τ1`.
pub fn effective_params_quadrature(
    p: &SabrParams,
    period: &AccrualPeriod,
    q: DecayExponent,
) -> Result<EffectiveSabrParams> {
    effective_params_quadrature_with(p, period, q, &OracleOptions::default())
}

pub fn effective_params_quadrature_with(
    p: &SabrParams,
    period: &AccrualPeriod,
    q: DecayExponent,
    opts: &OracleOptions,
) -> Result<EffectiveSabrParams> {
    let m = effective_medium_integrals(p, period, q, opts)?;
    let t = period.tau1();
    let delta = m.delta_sq.sqrt();
    let (rho_hat, nu_hat) = if p.nu == 0.0 {
        (p.rho, 0.0)
    } else {
        (m.b / m.c.sqrt(), delta * m.c.sqrt())
    };
    Ok(EffectiveSabrParams {
        alpha_hat: delta * (0.25 * m.delta_sq * m.g * t).exp(),
        rho_hat,
        nu_hat,
        time_to_exercise: t,
    })
}
