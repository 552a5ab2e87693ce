//! Monte-Carlo simulation of the damped SABR dynamics.
//!
//! Each path draws from its own ChaCha8 stream (`seed`, stream = path index),
//! so results do not depend on thread count or scheduling. Reductions run
//! serially over the path-ordered samples with compensated summation.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::black76;
use crate::error::{Error, Result};
use crate::model::{psi_unchecked, AccrualPeriod, CapletStyle, DecayExponent, SabrParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Exact log step for `β = 1`.
    LogEulerBeta1,
    /// Euler on the displaced rate, absorbed at zero.
    EulerFullTruncation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub scheme: Scheme,
    /// Pairs path `2j` with the mirrored normals of path `2j + 1`.
    pub antithetic: bool,
    /// Evaluate `ψ` at step midpoints instead of left endpoints.
    pub psi_midpoint: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_paths: 200_000,
            dt: 1.0 / 512.0,
            seed: 20_240_501,
            scheme: Scheme::LogEulerBeta1,
            antithetic: false,
            psi_midpoint: false,
        }
    }
}

impl McConfig {
    pub fn validate(&self, p: &SabrParams, period: &AccrualPeriod) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::Config("n_paths must be >= 1".into()));
        }
        if self.antithetic && !self.n_paths.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "antithetic sampling needs an even path count, got {}",
                self.n_paths
            )));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() || self.dt > period.tau1() {
            return Err(Error::Config(format!(
                "dt must lie in (0, tau1={}], got {}",
                period.tau1(),
                self.dt
            )));
        }
        if self.scheme == Scheme::LogEulerBeta1 && p.beta != 1.0 {
            return Err(Error::Config(format!(
                "log_euler_beta1 requires beta = 1, got {}",
                p.beta
            )));
        }
        if let Some(v) = p.violations().first() {
            return Err(Error::Domain(v.to_string()));
        }
        Ok(())
    }
}

/// Simulation grid on `[0, τ1]` with a node at `τ0` when it lies inside.
#[derive(Debug, Clone)]
struct TimeGrid {
    times: Vec<f64>,
    /// Index of the node at `τ0`; `None` when `τ0 ≤ 0`.
    start: Option<usize>,
    psi: Vec<f64>,
}

fn push_segment(times: &mut Vec<f64>, a: f64, b: f64, dt: f64) {
    let n = ((b - a) / dt * (1.0 + 1e-12)).floor() as usize;
    for i in 1..=n {
        times.push(a + i as f64 * dt);
    }
    let last = *times.last().unwrap();
    if b - last > 1e-12 * b.abs().max(1.0) {
        times.push(b);
    } else {
        *times.last_mut().unwrap() = b;
    }
}

impl TimeGrid {
    fn new(period: &AccrualPeriod, q: f64, cfg: &McConfig) -> Self {
        let (t0, t1) = (period.tau0(), period.tau1());
        let mut times = vec![0.0];
        let start = if t0 > 0.0 {
            push_segment(&mut times, 0.0, t0, cfg.dt);
            let i = times.len() - 1;
            if t1 > t0 {
                push_segment(&mut times, t0, t1, cfg.dt);
            }
            Some(i)
        } else {
            push_segment(&mut times, 0.0, t1, cfg.dt);
            None
        };
        let psi = times
            .windows(2)
            .map(|w| {
                let t = if cfg.psi_midpoint {
                    0.5 * (w[0] + w[1])
                } else {
                    w[0]
                };
                psi_unchecked(t, period, q)
            })
            .collect();
        Self { times, start, psi }
    }

    fn steps(&self) -> usize {
        self.times.len() - 1
    }
}

#[derive(Debug, Clone, Copy)]
struct Outcome {
    start: f64,
    end: f64,
    absorbed: bool,
}

struct Engine {
    grid: TimeGrid,
    p: SabrParams,
    forward_rate: f64,
    scheme: Scheme,
}

impl Engine {
    fn new(
        p: &SabrParams,
        forward_rate: f64,
        period: &AccrualPeriod,
        q: DecayExponent,
        cfg: &McConfig,
    ) -> Result<Self> {
        cfg.validate(p, period)?;
        if !(forward_rate + p.shift > 0.0) || !forward_rate.is_finite() {
            return Err(Error::domain(format!(
                "forward rate + shift must be > 0, got {}",
                forward_rate + p.shift
            )));
        }
        Ok(Self {
            grid: TimeGrid::new(period, q.value(), cfg),
            p: *p,
            forward_rate,
            scheme: cfg.scheme,
        })
    }

    /// Steps one path. `normals(h)` returns `(Z_W, Z_⊥)` for a step of
    /// length `h`; `visit` sees every node as `(index, rate, vol)`.
    fn run<N, V>(&self, mut normals: N, mut visit: V) -> Outcome
    where
        N: FnMut(usize) -> (f64, f64),
        V: FnMut(usize, f64, f64),
    {
        let SabrParams {
            alpha,
            beta,
            rho,
            nu,
            shift,
        } = self.p;
        let rho_perp = (1.0 - rho * rho).max(0.0).sqrt();
        let times = &self.grid.times;
        let mut f = self.forward_rate + shift;
        let mut sigma = alpha;
        let mut absorbed = false;
        let mut start = self.forward_rate;
        visit(0, f - shift, sigma);
        for k in 0..self.grid.steps() {
            let h = times[k + 1] - times[k];
            let sqrt_h = h.sqrt();
            let (zw, zp) = normals(k);
            let zb = rho * zw + rho_perp * zp;
            let vol = self.grid.psi[k] * sigma;
            if !absorbed {
                match self.scheme {
                    Scheme::LogEulerBeta1 => {
                        f *= (-0.5 * vol * vol * h + vol * sqrt_h * zb).exp();
                    }
                    Scheme::EulerFullTruncation => {
                        f += vol * f.powf(beta) * sqrt_h * zb;
                        if f <= 0.0 {
                            f = 0.0;
                            absorbed = true;
                        }
                    }
                }
            }
            sigma *= (-0.5 * nu * nu * h + nu * sqrt_h * zw).exp();
            if self.grid.start == Some(k + 1) {
                start = f - shift;
            }
            visit(k + 1, f - shift, sigma);
        }
        Outcome {
            start,
            end: f - shift,
            absorbed,
        }
    }

    fn run_indexed<V>(&self, cfg: &McConfig, path: usize, visit: V) -> Outcome
    where
        V: FnMut(usize, f64, f64),
    {
        let (stream, sign) = if cfg.antithetic {
            (path / 2, if path.is_multiple_of(2) { 1.0 } else { -1.0 })
        } else {
            (path, 1.0)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(stream as u64);
        self.run(
            |_| {
                let zw: f64 = StandardNormal.sample(&mut rng);
                let zp: f64 = StandardNormal.sample(&mut rng);
                (sign * zw, sign * zp)
            },
            visit,
        )
    }
}

/// Samples of `R(τ0)` and `R(τ1)` in path order.
#[derive(Debug, Clone, PartialEq)]
pub struct McSamples {
    /// `R(τ0)` per path; the initial forward when `τ0 ≤ 0`.
    pub rate_at_start: Vec<f64>,
    pub rate_at_end: Vec<f64>,
    /// Paths absorbed at zero (Euler scheme only).
    pub absorbed: usize,
    pub antithetic: bool,
    pub forward_rate: f64,
    pub shift: f64,
    pub period: AccrualPeriod,
}

/// Simulates `cfg.n_paths` paths of `(R, σ)` from `R(0) = forward_rate`.
pub fn simulate_paths(
    p: &SabrParams,
    forward_rate: f64,
    period: &AccrualPeriod,
    q: DecayExponent,
    cfg: &McConfig,
) -> Result<McSamples> {
    let engine = Engine::new(p, forward_rate, period, q, cfg)?;
    let outcomes: Vec<Outcome> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| engine.run_indexed(cfg, i, |_, _, _| {}))
        .collect();
    Ok(McSamples {
        rate_at_start: outcomes.iter().map(|o| o.start).collect(),
        rate_at_end: outcomes.iter().map(|o| o.end).collect(),
        absorbed: outcomes.iter().filter(|o| o.absorbed).count(),
        antithetic: cfg.antithetic,
        forward_rate,
        shift: p.shift,
        period: *period,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub path: usize,
    pub times: Vec<f64>,
    pub rates: Vec<f64>,
    pub vols: Vec<f64>,
}

/// Full trajectories of the first `count` paths of the run described by
/// `cfg`; they coincide with the corresponding paths of [`simulate_paths`].
pub fn simulate_trajectories(
    p: &SabrParams,
    forward_rate: f64,
    period: &AccrualPeriod,
    q: DecayExponent,
    cfg: &McConfig,
    count: usize,
) -> Result<Vec<Trajectory>> {
    let engine = Engine::new(p, forward_rate, period, q, cfg)?;
    let count = count.min(cfg.n_paths);
    Ok((0..count)
        .map(|path| {
            let n = engine.grid.times.len();
            let mut rates = Vec::with_capacity(n);
            let mut vols = Vec::with_capacity(n);
            engine.run_indexed(cfg, path, |_, r, s| {
                rates.push(r);
                vols.push(s);
            });
            Trajectory {
                path,
                times: engine.grid.times.clone(),
                rates,
                vols,
            }
        })
        .collect())
}

#[derive(Debug, Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Mean and standard error of i.i.d. draws; antithetic pairs are averaged
/// first so each pair counts as one draw.
fn mean_and_se(values: impl Iterator<Item = f64> + Clone, antithetic: bool) -> (f64, f64) {
    let draws: Vec<f64> = if antithetic {
        let v: Vec<f64> = values.collect();
        v.chunks_exact(2).map(|c| 0.5 * (c[0] + c[1])).collect()
    } else {
        values.collect()
    };
    let n = draws.len() as f64;
    let mut s = Kahan::default();
    draws.iter().for_each(|&x| s.add(x));
    let mean = s.sum / n;
    if draws.len() < 2 {
        return (mean, 0.0);
    }
    let mut ss = Kahan::default();
    draws.iter().for_each(|&x| ss.add((x - mean) * (x - mean)));
    (mean, (ss.sum / (n - 1.0) / n).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSmile {
    pub style: CapletStyle,
    /// Exercise time used for the vol inversion; `None` once fixed.
    pub expiry: Option<f64>,
    pub strikes: Vec<f64>,
    pub prices: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// `None` where the price falls outside the invertible bracket.
    pub implied_vols: Vec<Option<f64>>,
    /// Price standard error over vega.
    pub vol_std_errors: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JensenDiagnostic {
    pub strike: f64,
    /// Backward minus forward PV.
    pub gap: f64,
    pub std_error: f64,
}

impl JensenDiagnostic {
    /// One-sided test `gap ≥ −z · SE`.
    pub fn holds(&self, z: f64) -> bool {
        self.gap >= -z * self.std_error
    }
}

impl McSamples {
    fn check_strikes(&self, strikes: &[f64], discount: f64) -> Result<()> {
        if !(discount > 0.0 && discount <= 1.0) {
            return Err(Error::domain(format!(
                "discount must be in (0,1], got {discount}"
            )));
        }
        if let Some(k) = strikes.iter().find(|&&k| !(k + self.shift > 0.0)) {
            return Err(Error::domain(format!(
                "strike + shift must be > 0, got {}",
                k + self.shift
            )));
        }
        Ok(())
    }

    fn fixing(&self, style: CapletStyle) -> (&[f64], Option<f64>) {
        match style {
            CapletStyle::Backward => (&self.rate_at_end, Some(self.period.tau1())),
            CapletStyle::Forward => {
                let t0 = self.period.tau0();
                (&self.rate_at_start, (t0 > 0.0).then_some(t0))
            }
        }
    }

    /// Discounted payoff means with implied vols at the style's exercise
    /// time (`τ1` backward, `τ0` forward).
    pub fn smile(&self, strikes: &[f64], style: CapletStyle, discount: f64) -> Result<McSmile> {
        self.check_strikes(strikes, discount)?;
        let (fixings, expiry) = self.fixing(style);
        let f0 = self.forward_rate + self.shift;
        let mut out = McSmile {
            style,
            expiry,
            strikes: strikes.to_vec(),
            prices: Vec::with_capacity(strikes.len()),
            std_errors: Vec::with_capacity(strikes.len()),
            implied_vols: Vec::with_capacity(strikes.len()),
            vol_std_errors: Vec::with_capacity(strikes.len()),
        };
        for &k in strikes {
            let (mean, se) = mean_and_se(
                fixings.iter().map(|&r| discount * (r - k).max(0.0)),
                self.antithetic,
            );
            let vol = expiry
                .and_then(|t| black76::implied_vol(t, k + self.shift, f0, mean / discount).ok());
            let vol_se = match (vol, expiry) {
                (Some(v), Some(t)) => {
                    let q = black76::BlackQuote::new(t, k + self.shift, f0, v);
                    black76::black_vega(&q)
                        .ok()
                        .map(|vega| se / discount / vega)
                }
                _ => None,
            };
            out.prices.push(mean);
            out.std_errors.push(se);
            out.implied_vols.push(vol);
            out.vol_std_errors.push(vol_se);
        }
        Ok(out)
    }

    /// Backward minus forward PV per strike on common paths.
    pub fn jensen_gaps(&self, strikes: &[f64], discount: f64) -> Result<Vec<JensenDiagnostic>> {
        self.check_strikes(strikes, discount)?;
        Ok(strikes
            .iter()
            .map(|&k| {
                let diff = self
                    .rate_at_end
                    .iter()
                    .zip(&self.rate_at_start)
                    .map(|(&b, &f)| discount * ((b - k).max(0.0) - (f - k).max(0.0)));
                let (gap, std_error) = mean_and_se(diff, self.antithetic);
                JensenDiagnostic {
                    strike: k,
                    gap,
                    std_error,
                }
            })
            .collect())
    }

    /// Mean of `R(τ1)` with its standard error.
    pub fn terminal_mean(&self) -> (f64, f64) {
        mean_and_se(self.rate_at_end.iter().copied(), self.antithetic)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McMarket {
    pub forward_rate: f64,
    pub discount: f64,
}

/// Simulates and prices one caplet style on `strikes`.
pub fn mc_caplet_smile(
    p: &SabrParams,
    market: &McMarket,
    period: &AccrualPeriod,
    q: DecayExponent,
    strikes: &[f64],
    cfg: &McConfig,
    style: CapletStyle,
) -> Result<McSmile> {
    simulate_paths(p, market.forward_rate, period, q, cfg)?.smile(strikes, style, market.discount)
}

/// 11 strikes geometrically spaced over `[R(0)/2, 2R(0)]`.
pub fn default_strike_grid(forward_rate: f64) -> Vec<f64> {
    (0..11)
        .map(|i| forward_rate * 2f64.powf(-1.0 + 0.2 * i as f64))
        .collect()
}
