//! Decay of a compounded rate's volatility implied by a Hull-White short
//! rate, compared against the power-law `ψ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{psi_unchecked, AccrualPeriod, DecayExponent};

/// Below this `|κ|` the exponentials are replaced by their expansions.
const KAPPA_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HullWhiteDecaySpec {
    /// Mean-reversion speed, either sign.
    pub kappa: f64,
    pub period: AccrualPeriod,
    /// Constant short-rate volatility `ξ`.
    pub xi: f64,
}

impl HullWhiteDecaySpec {
    pub fn new(kappa: f64, period: AccrualPeriod, xi: f64) -> Result<Self> {
        if !kappa.is_finite() {
            return Err(Error::domain(format!("kappa must be finite, got {kappa}")));
        }
        if !(xi >= 0.0) || !xi.is_finite() {
            return Err(Error::domain(format!("xi must be >= 0, got {xi}")));
        }
        Ok(Self { kappa, period, xi })
    }

    fn check(&self, t: f64) -> Result<()> {
        if t > self.period.tau1() || t.is_nan() {
            return Err(Error::domain(format!(
                "t={t} lies beyond tau1={}",
                self.period.tau1()
            )));
        }
        Ok(())
    }
}

fn psi_tilde_unchecked(t: f64, kappa: f64, period: &AccrualPeriod) -> f64 {
    let (t0, t1) = (period.tau0(), period.tau1());
    if t <= t0 {
        return 1.0;
    }
    if kappa.abs() < KAPPA_EPS {
        return (t1 - t) / (t1 - t0);
    }
    // (e^{−κt} − e^{−κτ1})/(e^{−κτ0} − e^{−κτ1}), both factored by e^{−κτ1}
    ((kappa * (t1 - t)).exp_m1() / (kappa * (t1 - t0)).exp_m1()).clamp(0.0, 1.0)
}

/// `ψ̃(t) = min(1, (e^{−κt} − e^{−κτ1})/(e^{−κτ0} − e^{−κτ1}))`.
pub fn psi_tilde(t: f64, spec: &HullWhiteDecaySpec) -> Result<f64> {
    spec.check(t)?;
    Ok(psi_tilde_unchecked(t, spec.kappa, &spec.period))
}

/// `σ̃(t) = (e^{−κ(τ0−t)} − e^{−κ(τ1−t)})/κ · ξ`.
pub fn sigma_tilde(t: f64, spec: &HullWhiteDecaySpec) -> Result<f64> {
    spec.check(t)?;
    let (t0, len, k) = (spec.period.tau0(), spec.period.length(), spec.kappa);
    if k.abs() < KAPPA_EPS {
        return Ok(len * spec.xi * (1.0 + k * (t - t0) - 0.5 * k * len));
    }
    Ok(-(k * (t - t0)).exp() * (-k * len).exp_m1() / k * spec.xi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayShapeRow {
    pub t: f64,
    pub psi: f64,
    pub psi_tilde: f64,
    /// `ψ̃ − ψ`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayShapeReport {
    pub kappa: f64,
    pub q: f64,
    pub rows: Vec<DecayShapeRow>,
    pub max_abs_gap: f64,
}

/// `n + 1` equally spaced points on `[τ0, τ1]`.
pub fn uniform_grid(period: &AccrualPeriod, n: usize) -> Vec<f64> {
    let n = n.max(1);
    let (t0, len) = (period.tau0(), period.length());
    (0..=n)
        .map(|i| {
            if i == n {
                period.tau1()
            } else {
                t0 + len * i as f64 / n as f64
            }
        })
        .collect()
}

/// Tabulates `ψ` (exponent `q`) against `ψ̃` (speed `kappa`) on `grid`.
pub fn decay_shape_report(
    kappa: f64,
    q: DecayExponent,
    period: &AccrualPeriod,
    grid: &[f64],
) -> Result<DecayShapeReport> {
    if !kappa.is_finite() {
        return Err(Error::domain(format!("kappa must be finite, got {kappa}")));
    }
    if let Some(t) = grid
        .iter()
        .find(|&&t| !(t >= period.tau0() && t <= period.tau1()))
    {
        return Err(Error::domain(format!(
            "grid point {t} outside [{}, {}]",
            period.tau0(),
            period.tau1()
        )));
    }
    let rows: Vec<DecayShapeRow> = grid
        .iter()
        .map(|&t| {
            let psi = psi_unchecked(t, period, q.value());
            let psi_tilde = psi_tilde_unchecked(t, kappa, period);
            DecayShapeRow {
                t,
                psi,
                psi_tilde,
                gap: psi_tilde - psi,
            }
        })
        .collect();
    let max_abs_gap = rows.iter().map(|r| r.gap.abs()).fold(0.0, f64::max);
    Ok(DecayShapeReport {
        kappa,
        q: q.value(),
        rows,
        max_abs_gap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Curvature {
    Convex,
    Concave,
    Linear,
    Mixed,
}

/// Sign class of the second differences of `values` on a uniform grid.
pub fn curvature(values: &[f64], tol: f64) -> Curvature {
    let mut pos = false;
    let mut neg = false;
    for w in values.windows(3) {
        let d2 = w[0] - 2.0 * w[1] + w[2];
        pos |= d2 > tol;
        neg |= d2 < -tol;
    }
    match (pos, neg) {
        (false, false) => Curvature::Linear,
        (true, false) => Curvature::Convex,
        (false, true) => Curvature::Concave,
        (true, true) => Curvature::Mixed,
    }
}

/// Least-squares `q` making `ψ` closest to `ψ̃` on an `n`-interval grid.
///
/// Diagnostic only: the two families agree in curvature class, not in any
/// canonical mapping between `κ` and `q`.
pub fn fit_q_to_hull_white(kappa: f64, period: &AccrualPeriod, n: usize) -> Result<f64> {
    if period.is_degenerate() {
        return Err(Error::domain("zero-length period has no decay to fit"));
    }
    let grid = uniform_grid(period, n);
    let target: Vec<f64> = grid
        .iter()
        .map(|&t| psi_tilde_unchecked(t, kappa, period))
        .collect();
    let loss = |ln_q: f64| {
        let q = ln_q.exp();
        grid.iter()
            .zip(&target)
            .map(|(&t, &y)| (psi_unchecked(t, period, q) - y).powi(2))
            .sum::<f64>()
    };
    // golden-section search on ln q ∈ [ln 1e−3, ln 1e3]
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (1e-3f64.ln(), 1e3f64.ln());
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (loss(c), loss(d));
    while b - a > 1e-12 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = loss(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = loss(d);
        }
    }
    Ok((0.5 * (a + b)).exp())
}
