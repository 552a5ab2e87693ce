//! Parameter types shared by every pricing layer, and the volatility decay
//! factor ψ(t).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// SABR volatility state `(α, β, ρ, ν)` with an optional displacement.
///
/// A nonzero `shift` moves the lognormal boundary from 0 to `−shift`: the
/// Black and Hagan layers see `R + shift` and `K + shift`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SabrParams {
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub nu: f64,
    #[serde(default)]
    pub shift: f64,
}

impl SabrParams {
    /// Builds an unshifted parameter set, rejecting invalid values.
    pub fn new(alpha: f64, beta: f64, rho: f64, nu: f64) -> Result<Self> {
        Self::with_shift(alpha, beta, rho, nu, 0.0)
    }

    pub fn with_shift(alpha: f64, beta: f64, rho: f64, nu: f64, shift: f64) -> Result<Self> {
        let p = Self {
            alpha,
            beta,
            rho,
            nu,
            shift,
        };
        match p.violations().first() {
            None => Ok(p),
            Some(v) => Err(Error::Domain(v.to_string())),
        }
    }

    /// Every violated parameter invariant, in field order.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            out.push(Violation::AlphaNotPositive(self.alpha));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            out.push(Violation::BetaOutOfRange(self.beta));
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            out.push(Violation::RhoOutOfRange(self.rho));
        }
        if !(self.nu >= 0.0) || !self.nu.is_finite() {
            out.push(Violation::NuNegative(self.nu));
        }
        if !(self.shift >= 0.0) || !self.shift.is_finite() {
            out.push(Violation::ShiftNegative(self.shift));
        }
        out
    }

    /// Same β and shift, different `(α, ρ, ν)`.
    pub fn with_triple(&self, alpha: f64, rho: f64, nu: f64) -> Self {
        Self {
            alpha,
            rho,
            nu,
            ..*self
        }
    }
}

/// Accrual period `[τ0, τ1]` in year fractions from pricing time 0.
///
/// `τ0` may be negative (the period has already started). A zero-length
/// period `τ0 = τ1` is accepted and stands for a rate with no accrual
/// window, i.e. the standard SABR model up to `τ1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPeriod", into = "RawPeriod")]
pub struct AccrualPeriod {
    tau0: f64,
    tau1: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPeriod {
    tau0: f64,
    tau1: f64,
}

impl TryFrom<RawPeriod> for AccrualPeriod {
    type Error = Error;
    fn try_from(raw: RawPeriod) -> Result<Self> {
        AccrualPeriod::new(raw.tau0, raw.tau1)
    }
}

impl From<AccrualPeriod> for RawPeriod {
    fn from(p: AccrualPeriod) -> Self {
        RawPeriod {
            tau0: p.tau0,
            tau1: p.tau1,
        }
    }
}

impl AccrualPeriod {
    pub fn new(tau0: f64, tau1: f64) -> Result<Self> {
        if !tau0.is_finite() || !tau1.is_finite() {
            return Err(Error::domain("accrual times must be finite"));
        }
        if !(tau1 > 0.0) {
            return Err(Error::domain(format!("tau1 must be > 0, got {tau1}")));
        }
        if tau0 > tau1 {
            return Err(Error::domain(format!(
                "tau0 must not exceed tau1, got tau0={tau0}, tau1={tau1}"
            )));
        }
        Ok(Self { tau0, tau1 })
    }

    pub fn tau0(&self) -> f64 {
        self.tau0
    }

    pub fn tau1(&self) -> f64 {
        self.tau1
    }

    pub fn length(&self) -> f64 {
        self.tau1 - self.tau0
    }

    /// `τ0 = τ1`: no volatility damping before the payment date.
    pub fn is_degenerate(&self) -> bool {
        self.tau0 == self.tau1
    }

    /// Part of the accrual period lies in the past.
    pub fn is_seasoned(&self) -> bool {
        self.tau0 < 0.0
    }
}

/// Decay speed `q > 0` of ψ. The limits `q → 0` and `q → ∞` are separate
/// operations in [`crate::effective`].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct DecayExponent(f64);

impl DecayExponent {
    pub fn new(q: f64) -> Result<Self> {
        if q > 0.0 && q.is_finite() {
            Ok(Self(q))
        } else {
            Err(Error::domain(format!(
                "decay exponent q must be > 0 and finite, got {q}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for DecayExponent {
    type Error = Error;
    fn try_from(q: f64) -> Result<Self> {
        Self::new(q)
    }
}

impl From<DecayExponent> for f64 {
    fn from(q: DecayExponent) -> f64 {
        q.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapletStyle {
    /// Option on the compounded rate, fixing at `τ1`.
    Backward,
    /// Option on the term rate fixing at `τ0`.
    Forward,
}

impl CapletStyle {
    pub fn as_str(self) -> &'static str {
        match self {
            CapletStyle::Backward => "backward",
            CapletStyle::Forward => "forward",
        }
    }
}

impl fmt::Display for CapletStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CapletStyle {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "backward" => Ok(CapletStyle::Backward),
            "forward" => Ok(CapletStyle::Forward),
            other => Err(Error::domain(format!("unknown caplet style '{other}'"))),
        }
    }
}

/// A single caplet on the rate of `period`, paid at `τ1`.
///
/// For a forward-looking caplet with `τ0 ≤ 0` the rate has already fixed and
/// `forward_rate` is that realised fixing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapletSpec {
    pub strike: f64,
    pub style: CapletStyle,
    pub period: AccrualPeriod,
    /// Discount factor `P(0, τ1)`.
    pub discount: f64,
    /// `R(0)`.
    pub forward_rate: f64,
}

impl CapletSpec {
    pub fn violations(&self, shift: f64) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            out.push(Violation::DiscountOutOfRange(self.discount));
        }
        if !(self.forward_rate + shift > 0.0) {
            out.push(Violation::ForwardBelowShift(self.forward_rate + shift));
        }
        if !(self.strike + shift > 0.0) {
            out.push(Violation::StrikeBelowShift(self.strike + shift));
        }
        out
    }
}

/// A violated invariant, reported as data by [`validate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Violation {
    AlphaNotPositive(f64),
    BetaOutOfRange(f64),
    RhoOutOfRange(f64),
    NuNegative(f64),
    ShiftNegative(f64),
    DiscountOutOfRange(f64),
    ForwardBelowShift(f64),
    StrikeBelowShift(f64),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::AlphaNotPositive(v) => write!(f, "alpha must be > 0 (got {v})"),
            Violation::BetaOutOfRange(v) => write!(f, "beta out of [0,1] (got {v})"),
            Violation::RhoOutOfRange(v) => write!(f, "rho out of [-1,1] (got {v})"),
            Violation::NuNegative(v) => write!(f, "nu must be >= 0 (got {v})"),
            Violation::ShiftNegative(v) => write!(f, "shift must be >= 0 (got {v})"),
            Violation::DiscountOutOfRange(v) => write!(f, "discount out of (0,1] (got {v})"),
            Violation::ForwardBelowShift(v) => {
                write!(f, "forward_rate + shift <= 0 (got {v})")
            }
            Violation::StrikeBelowShift(v) => write!(f, "strike + shift <= 0 (got {v})"),
        }
    }
}

/// Checks a parameter set against a caplet, returning every violation.
pub fn validate(params: &SabrParams, spec: &CapletSpec) -> std::result::Result<(), Vec<Violation>> {
    let mut out = params.violations();
    out.extend(spec.violations(params.shift.max(0.0)));
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Volatility decay factor `ψ(t) = min(1, (τ1 − t)/(τ1 − τ0))^q`.
pub fn psi(t: f64, period: &AccrualPeriod, q: DecayExponent) -> Result<f64> {
    if t > period.tau1() || t.is_nan() {
        return Err(Error::domain(format!(
            "psi evaluated at t={t} beyond tau1={}",
            period.tau1()
        )));
    }
    Ok(psi_unchecked(t, period, q.value()))
}

#[inline]
pub(crate) fn psi_unchecked(t: f64, period: &AccrualPeriod, q: f64) -> f64 {
    if t <= period.tau0() {
        1.0
    } else {
        ((period.tau1() - t) / period.length()).max(0.0).powf(q)
    }
}
