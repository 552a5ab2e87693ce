//! Marking `(α, ρ, ν)` to forward-looking caplet quotes and `q` to an
//! at-the-money backward-looking quote.

use std::fmt;
use std::str::FromStr;

use roots::{find_root_brent, Convergency};
use serde::{Deserialize, Serialize};

use crate::black76;
use crate::effective::{self, QLimit};
use crate::error::{Error, Result};
use crate::hagan;
use crate::model::{AccrualPeriod, CapletStyle, DecayExponent, SabrParams};
use crate::optim::{nelder_mead, NelderMeadConfig};
use crate::pricer;

/// Search bracket of the `q` fit.
pub const Q_MIN: f64 = 1e-3;
pub const Q_MAX: f64 = 1e3;
/// Price tolerance of the `q` fit and bracket decisions.
pub const PRICE_TOL: f64 = 1e-10;

const RHO_CAP: f64 = 0.999;
const PENALTY: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuoteKind {
    ImpliedVol,
    Pv,
}

impl QuoteKind {
    pub fn as_str(self) -> &'static str {
        match self {
            QuoteKind::ImpliedVol => "implied_vol",
            QuoteKind::Pv => "pv",
        }
    }
}

impl fmt::Display for QuoteKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QuoteKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "implied_vol" | "vol" => Ok(QuoteKind::ImpliedVol),
            "pv" | "price" => Ok(QuoteKind::Pv),
            other => Err(Error::domain(format!(
                "unknown quote kind '{other}' (expected implied_vol or pv)"
            ))),
        }
    }
}

/// One market quote as read from a file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuoteEntry {
    pub strike: f64,
    pub style: CapletStyle,
    pub quote_kind: QuoteKind,
    pub value: f64,
    pub weight: f64,
}

/// What every quote in a set shares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuoteContext {
    pub period: AccrualPeriod,
    pub forward_rate: f64,
    pub discount: f64,
    #[serde(default)]
    pub shift: f64,
}

/// A quote with both representations filled in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quote {
    pub strike: f64,
    pub style: CapletStyle,
    pub weight: f64,
    pub expiry: f64,
    pub implied_vol: f64,
    pub pv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuoteSet {
    pub context: QuoteContext,
    pub quotes: Vec<Quote>,
}

impl QuoteSet {
    /// Converts every entry to both vol and PV, rejecting the first
    /// entry that cannot be a caplet quote.
    pub fn new(entries: &[QuoteEntry], context: QuoteContext) -> Result<Self> {
        let c = context;
        if !(c.discount > 0.0 && c.discount <= 1.0) {
            return Err(Error::domain(format!(
                "discount must be in (0,1], got {}",
                c.discount
            )));
        }
        if !(c.forward_rate + c.shift > 0.0) || !c.forward_rate.is_finite() {
            return Err(Error::domain(format!(
                "forward rate + shift must be > 0, got {}",
                c.forward_rate + c.shift
            )));
        }
        let f = c.forward_rate + c.shift;
        let quotes = entries
            .iter()
            .enumerate()
            .map(|(index, e)| {
                let bad = |reason: String| Error::InvalidQuote { index, reason };
                if !(e.weight > 0.0) || !e.weight.is_finite() {
                    return Err(bad(format!("weight must be > 0, got {}", e.weight)));
                }
                let k = e.strike + c.shift;
                if !(k > 0.0) || !e.strike.is_finite() {
                    return Err(bad(format!("strike + shift must be > 0, got {k}")));
                }
                let expiry = match e.style {
                    CapletStyle::Backward => c.period.tau1(),
                    CapletStyle::Forward => c.period.tau0(),
                };
                if !(expiry > 0.0) {
                    return Err(bad(format!(
                        "{} caplet has already fixed (expiry {expiry}) and carries no volatility",
                        e.style
                    )));
                }
                let (implied_vol, pv) = match e.quote_kind {
                    QuoteKind::ImpliedVol => {
                        if !(e.value > 0.0) || !e.value.is_finite() {
                            return Err(bad(format!("implied vol must be > 0, got {}", e.value)));
                        }
                        let pv = c.discount * black76::call_unchecked(expiry, k, f, e.value);
                        (e.value, pv)
                    }
                    QuoteKind::Pv => {
                        let vol = black76::implied_vol(expiry, k, f, e.value / c.discount)
                            .map_err(|err| bad(format!("pv {} not invertible: {err}", e.value)))?;
                        (vol, e.value)
                    }
                };
                Ok(Quote {
                    strike: e.strike,
                    style: e.style,
                    weight: e.weight,
                    expiry,
                    implied_vol,
                    pv,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { context, quotes })
    }

    fn of_style(&self, style: CapletStyle) -> impl Iterator<Item = &Quote> {
        self.quotes.iter().filter(move |q| q.style == style)
    }

    fn atm(&self, style: CapletStyle) -> Result<&Quote> {
        let r = self.context.forward_rate;
        let mut it = self
            .of_style(style)
            .filter(|q| (q.strike - r).abs() <= 1e-12 * r.abs().max(1e-12));
        match (it.next(), it.next()) {
            (Some(q), None) => Ok(q),
            (None, _) => Err(Error::Config(format!(
                "no at-the-money {style} quote (strike = forward rate {r})"
            ))),
            _ => Err(Error::Config(format!(
                "several at-the-money {style} quotes"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualMetric {
    #[default]
    ImpliedVol,
    Pv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitParameters {
    /// `α`, `ρ` and `ν`.
    #[default]
    All,
    /// `α` only, `ρ` and `ν` held at their initial values.
    AlphaOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub metric: ResidualMetric,
    pub parameters: FitParameters,
    pub max_iter: usize,
    /// Objective tolerance of the simplex search.
    pub tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            metric: ResidualMetric::ImpliedVol,
            parameters: FitParameters::All,
            max_iter: 2000,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuoteResidual {
    pub strike: f64,
    pub style: CapletStyle,
    pub market: f64,
    pub model: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub params: SabrParams,
    /// Fitted decay exponent, `q` calibrations only.
    pub q: Option<f64>,
    /// `q` hit the upper end of its bracket.
    pub q_capped: bool,
    pub objective: f64,
    pub initial_objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub residuals: Vec<QuoteResidual>,
}

fn model_value(
    q: &Quote,
    ctx: &QuoteContext,
    p: &SabrParams,
    metric: ResidualMetric,
) -> Result<f64> {
    let vol = hagan::hagan_implied_vol(q.expiry, q.strike, ctx.forward_rate, p)?;
    Ok(match metric {
        ResidualMetric::ImpliedVol => vol,
        ResidualMetric::Pv => {
            ctx.discount
                * black76::call_unchecked(
                    q.expiry,
                    q.strike + p.shift,
                    ctx.forward_rate + p.shift,
                    vol,
                )
        }
    })
}

fn market_value(q: &Quote, metric: ResidualMetric) -> f64 {
    match metric {
        ResidualMetric::ImpliedVol => q.implied_vol,
        ResidualMetric::Pv => q.pv,
    }
}

fn residuals(
    quotes: &[&Quote],
    ctx: &QuoteContext,
    p: &SabrParams,
    metric: ResidualMetric,
) -> Result<Vec<QuoteResidual>> {
    quotes
        .iter()
        .map(|q| {
            let model = model_value(q, ctx, p, metric)?;
            let market = market_value(q, metric);
            Ok(QuoteResidual {
                strike: q.strike,
                style: q.style,
                market,
                model,
                residual: model - market,
            })
        })
        .collect()
}

fn objective(quotes: &[&Quote], ctx: &QuoteContext, p: &SabrParams, metric: ResidualMetric) -> f64 {
    let total_weight: f64 = quotes.iter().map(|q| q.weight).sum();
    let mut sum = 0.0;
    for q in quotes {
        match model_value(q, ctx, p, metric) {
            Ok(m) if m.is_finite() => sum += q.weight * (m - market_value(q, metric)).powi(2),
            _ => return PENALTY,
        }
    }
    sum / total_weight
}

fn to_unconstrained(p: &SabrParams) -> [f64; 3] {
    [
        p.alpha.ln(),
        (p.rho / RHO_CAP).clamp(-1.0 + 1e-15, 1.0 - 1e-15).atanh(),
        p.nu.max(1e-8).ln(),
    ]
}

fn from_unconstrained(base: &SabrParams, x: &[f64; 3]) -> SabrParams {
    base.with_triple(x[0].exp(), RHO_CAP * x[1].tanh(), x[2].exp())
}

/// Weighted least-squares fit of the forward-looking quotes in `quotes`
/// through the Hagan formula. `β` and the shift come from `initial`.
///
/// A fit that stops at `max_iter` returns its best point with
/// `converged = false`.
pub fn calibrate_forward_smile(
    quotes: &QuoteSet,
    initial: &SabrParams,
    opts: &FitOptions,
) -> Result<CalibrationResult> {
    let ctx = &quotes.context;
    if !(ctx.period.tau0() > 0.0) {
        return Err(Error::domain(format!(
            "forward-looking smile needs tau0 > 0, got {}",
            ctx.period.tau0()
        )));
    }
    if initial.shift != ctx.shift {
        return Err(Error::domain(format!(
            "model shift {} differs from quote shift {}",
            initial.shift, ctx.shift
        )));
    }
    if let Some(v) = initial.violations().first() {
        return Err(Error::Domain(v.to_string()));
    }
    let fwd: Vec<&Quote> = quotes.of_style(CapletStyle::Forward).collect();
    if fwd.is_empty() {
        return Err(Error::Config(
            "no forward-looking quotes to calibrate".into(),
        ));
    }
    let metric = opts.metric;
    let initial_objective = objective(&fwd, ctx, initial, metric);

    if opts.parameters == FitParameters::AlphaOnly && fwd.len() == 1 {
        if let Ok(atm) = quotes.atm(CapletStyle::Forward) {
            let alpha = solve_alpha_atm(atm.expiry, ctx.forward_rate, atm.implied_vol, initial)?;
            let params = initial.with_triple(alpha, initial.rho, initial.nu);
            return finish(&fwd, ctx, params, None, initial_objective, 0, true, metric);
        }
    }

    let start = to_unconstrained(initial);
    let nm_cfg = NelderMeadConfig {
        max_iter: opts.max_iter,
        f_tol: opts.tolerance,
        x_tol: 1e-10,
        step: 0.2,
    };
    let (params, iterations, converged) = match opts.parameters {
        FitParameters::All => {
            let r = nelder_mead(
                |x| {
                    objective(
                        &fwd,
                        ctx,
                        &from_unconstrained(initial, &[x[0], x[1], x[2]]),
                        metric,
                    )
                },
                &start,
                &nm_cfg,
            );
            let p = from_unconstrained(initial, &[r.x[0], r.x[1], r.x[2]]);
            (p, r.iterations, r.converged)
        }
        FitParameters::AlphaOnly => {
            let r = nelder_mead(
                |x| {
                    objective(
                        &fwd,
                        ctx,
                        &initial.with_triple(x[0].exp(), initial.rho, initial.nu),
                        metric,
                    )
                },
                &start[..1],
                &nm_cfg,
            );
            let p = initial.with_triple(r.x[0].exp(), initial.rho, initial.nu);
            (p, r.iterations, r.converged)
        }
    };
    // The simplex starts at the initial point, so this only guards the
    // transform round trip.
    let params = if objective(&fwd, ctx, &params, metric) <= initial_objective {
        params
    } else {
        *initial
    };
    finish(
        &fwd,
        ctx,
        params,
        None,
        initial_objective,
        iterations,
        converged,
        metric,
    )
}

#[allow(clippy::too_many_arguments)]
fn finish(
    quotes: &[&Quote],
    ctx: &QuoteContext,
    params: SabrParams,
    q: Option<f64>,
    initial_objective: f64,
    iterations: usize,
    converged: bool,
    metric: ResidualMetric,
) -> Result<CalibrationResult> {
    Ok(CalibrationResult {
        params,
        q,
        q_capped: false,
        objective: objective(quotes, ctx, &params, metric),
        initial_objective,
        iterations,
        converged,
        residuals: residuals(quotes, ctx, &params, metric)?,
    })
}

/// Stops on exact zeros or when the bracket is `rel_tol` tight.
struct Tight {
    rel_tol: f64,
    max_iter: usize,
}

impl Convergency<f64> for Tight {
    fn is_root_found(&mut self, y: f64) -> bool {
        y == 0.0
    }

    fn is_converged(&mut self, x1: f64, x2: f64) -> bool {
        (x1 - x2).abs() <= self.rel_tol * x1.abs().max(x2.abs()).max(1.0)
    }

    fn is_iteration_limit_reached(&mut self, iter: usize) -> bool {
        iter >= self.max_iter
    }
}

fn brent<F: FnMut(f64) -> f64>(a: f64, b: f64, f: F) -> Result<f64> {
    let mut conv = Tight {
        rel_tol: 1e-15,
        max_iter: 200,
    };
    find_root_brent(a, b, f, &mut conv).map_err(|e| match e {
        roots::SearchError::NoBracketing => Error::Bracket {
            target: 0.0,
            low: a,
            high: b,
        },
        _ => Error::NoConvergence {
            iterations: 200,
            achieved: f64::NAN,
        },
    })
}

/// `α` reproducing `market_vol` at the money with `β`, `ρ`, `ν` from `p`.
pub fn solve_alpha_atm(
    expiry: f64,
    forward_rate: f64,
    market_vol: f64,
    p: &SabrParams,
) -> Result<f64> {
    if !(market_vol > 0.0) || !market_vol.is_finite() {
        return Err(Error::domain(format!(
            "market vol must be > 0, got {market_vol}"
        )));
    }
    let f = forward_rate + p.shift;
    if !(f > 0.0) {
        return Err(Error::domain(format!(
            "forward rate + shift must be > 0, got {f}"
        )));
    }
    let vol = |alpha: f64| {
        hagan::hagan_implied_vol(
            expiry,
            forward_rate,
            forward_rate,
            &p.with_triple(alpha, p.rho, p.nu),
        )
    };
    let lo = 1e-12 * market_vol * f.powf(1.0 - p.beta);
    if vol(lo)? >= market_vol {
        return Err(Error::Bracket {
            target: market_vol,
            low: vol(lo)?,
            high: f64::INFINITY,
        });
    }
    let mut hi = market_vol * f.powf(1.0 - p.beta);
    let mut doublings = 0;
    while vol(hi)? <= market_vol {
        hi *= 2.0;
        doublings += 1;
        if doublings > 60 {
            return Err(Error::Bracket {
                target: market_vol,
                low: vol(lo)?,
                high: vol(hi)?,
            });
        }
    }
    brent(lo, hi, |a| vol(a).map_or(f64::NAN, |v| v - market_vol))
}

/// Decay exponent matching the at-the-money backward-looking quote, with
/// `(α, β, ρ, ν)` held at `p`.
///
/// The price is nonincreasing in `q`, which is checked on the bracket
/// `[Q_MIN, Q_MAX]` first. Quotes between the `q → ∞` price and the price
/// at `Q_MAX` return `Q_MAX` with `q_capped` set.
pub fn calibrate_q_to_atm_backward(quotes: &QuoteSet, p: &SabrParams) -> Result<CalibrationResult> {
    let ctx = &quotes.context;
    if p.shift != ctx.shift {
        return Err(Error::domain(format!(
            "model shift {} differs from quote shift {}",
            p.shift, ctx.shift
        )));
    }
    let quote = quotes.atm(CapletStyle::Backward)?;
    let spec = crate::model::CapletSpec {
        strike: quote.strike,
        style: CapletStyle::Backward,
        period: ctx.period,
        discount: ctx.discount,
        forward_rate: ctx.forward_rate,
    };
    let price = |q: f64| -> Result<f64> {
        Ok(pricer::price_backward_caplet(&spec, p, DecayExponent::new(q)?)?.present_value)
    };
    let target = quote.pv;

    let n = 48;
    let grid: Vec<f64> = (0..=n)
        .map(|i| (Q_MIN.ln() + (Q_MAX.ln() - Q_MIN.ln()) * i as f64 / n as f64).exp())
        .collect();
    let prices = grid.iter().map(|&q| price(q)).collect::<Result<Vec<_>>>()?;
    for i in 1..prices.len() {
        if prices[i] > prices[i - 1] * (1.0 + 1e-13) {
            return Err(Error::NotMonotone(format!(
                "backward ATM price rises from {} at q={} to {} at q={}",
                prices[i - 1],
                grid[i - 1],
                prices[i],
                grid[i]
            )));
        }
    }
    let p_low_q = prices[0];
    let p_high_q = prices[n];
    let p_limit = match effective::limit_q_to_infinity(p, &ctx.period) {
        QLimit::Effective(_) => pricer::price_backward_caplet_q_infinity(&spec, p)?.present_value,
        QLimit::NoResidualVolatility { .. } => {
            ctx.discount * (ctx.forward_rate - quote.strike).max(0.0)
        }
    };
    if target > p_low_q + PRICE_TOL || target < p_limit - PRICE_TOL {
        return Err(Error::Bracket {
            target,
            low: p_limit,
            high: p_low_q,
        });
    }

    let residual = |q: f64| QuoteResidual {
        strike: quote.strike,
        style: CapletStyle::Backward,
        market: target,
        model: price(q).unwrap_or(f64::NAN),
        residual: price(q).unwrap_or(f64::NAN) - target,
    };
    let initial_objective = (p_low_q - target).powi(2);
    let (q_star, capped) = if target <= p_high_q {
        (Q_MAX, true)
    } else if target >= p_low_q {
        (Q_MIN, false)
    } else {
        let x = brent(Q_MIN.ln(), Q_MAX.ln(), |x| {
            price(x.exp()).map_or(f64::NAN, |v| v - target)
        })?;
        (x.exp(), false)
    };
    let r = residual(q_star);
    Ok(CalibrationResult {
        params: *p,
        q: Some(q_star),
        q_capped: capped,
        objective: r.residual * r.residual,
        initial_objective,
        iterations: 0,
        converged: capped || r.residual.abs() <= PRICE_TOL,
        residuals: vec![r],
    })
}
