//! Black-76 pricing of options on a lognormal forward and its inversion.
//!
//! All prices here are undiscounted; the pricer applies `P(0, τ1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;

/// Lower end of the implied-volatility search bracket.
pub const MIN_VOL: f64 = 1e-8;
/// Upper end of the implied-volatility search bracket.
pub const MAX_VOL: f64 = 10.0;

const MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlackQuote {
    pub expiry: f64,
    pub strike: f64,
    pub forward: f64,
    pub vol: f64,
}

impl BlackQuote {
    pub fn new(expiry: f64, strike: f64, forward: f64, vol: f64) -> Self {
        Self {
            expiry,
            strike,
            forward,
            vol,
        }
    }

    fn check(&self) -> Result<()> {
        check_market(self.expiry, self.strike, self.forward)?;
        if !(self.vol > 0.0) || !self.vol.is_finite() {
            return Err(Error::domain(format!("vol must be > 0, got {}", self.vol)));
        }
        Ok(())
    }
}

fn check_market(expiry: f64, strike: f64, forward: f64) -> Result<()> {
    if !(expiry > 0.0) || !expiry.is_finite() {
        return Err(Error::domain(format!("expiry must be > 0, got {expiry}")));
    }
    if !(strike > 0.0) || !strike.is_finite() {
        return Err(Error::domain(format!("strike must be > 0, got {strike}")));
    }
    if !(forward > 0.0) || !forward.is_finite() {
        return Err(Error::domain(format!("forward must be > 0, got {forward}")));
    }
    Ok(())
}

#[inline]
fn d_plus_minus(t: f64, k: f64, r: f64, sigma: f64) -> (f64, f64) {
    let sd = sigma * t.sqrt();
    let x = (r / k).ln();
    let dp = x / sd + 0.5 * sd;
    (dp, dp - sd)
}

#[inline]
pub(crate) fn call_unchecked(t: f64, k: f64, r: f64, sigma: f64) -> f64 {
    let (dp, dm) = d_plus_minus(t, k, r, sigma);
    r * normal::cdf(dp) - k * normal::cdf(dm)
}

#[inline]
pub(crate) fn put_unchecked(t: f64, k: f64, r: f64, sigma: f64) -> f64 {
    let (dp, dm) = d_plus_minus(t, k, r, sigma);
    k * normal::cdf(-dm) - r * normal::cdf(-dp)
}

/// Black call value `R Φ(d+) − K Φ(d−)`.
pub fn black_price(q: &BlackQuote) -> Result<f64> {
    q.check()?;
    Ok(call_unchecked(q.expiry, q.strike, q.forward, q.vol))
}

/// Black put (floorlet) value `K Φ(−d−) − R Φ(−d+)`.
pub fn black_put_price(q: &BlackQuote) -> Result<f64> {
    q.check()?;
    Ok(put_unchecked(q.expiry, q.strike, q.forward, q.vol))
}

/// `∂π/∂σ = R φ(d+) √T`, identical for calls and puts.
pub fn black_vega(q: &BlackQuote) -> Result<f64> {
    q.check()?;
    let (dp, _) = d_plus_minus(q.expiry, q.strike, q.forward, q.vol);
    Ok(q.forward * normal::pdf(dp) * q.expiry.sqrt())
}

/// The no-arbitrage bracket `(max(R − K, 0), R)` for an undiscounted call.
pub fn call_bounds(strike: f64, forward: f64) -> (f64, f64) {
    ((forward - strike).max(0.0), forward)
}

/// Black volatility reproducing an undiscounted call `price`.
///
/// The search runs on the out-of-the-money side: the call's time value is
/// the put price for `R > K`. Newton steps on `log(time value)` are kept
/// inside a shrinking bisection bracket on `[MIN_VOL, MAX_VOL]`.
pub fn implied_vol(expiry: f64, strike: f64, forward: f64, price: f64) -> Result<f64> {
    check_market(expiry, strike, forward)?;
    let (lower, upper) = call_bounds(strike, forward);
    if !(price > lower && price < upper) {
        return Err(Error::OutOfBounds {
            price,
            lower,
            upper,
        });
    }
    let time_value = price - lower;
    let itm = forward > strike;
    let otm = |s: f64| {
        if itm {
            put_unchecked(expiry, strike, forward, s)
        } else {
            call_unchecked(expiry, strike, forward, s)
        }
    };

    let mut lo = MIN_VOL;
    let mut hi = MAX_VOL;
    if otm(hi) < time_value || otm(lo) > time_value {
        return Err(Error::OutOfBounds {
            price,
            lower,
            upper,
        });
    }

    let target = time_value.ln();
    let x = (forward / strike).ln();
    let sqrt_t = expiry.sqrt();
    let mut sigma = if x.abs() > 1e-12 {
        (2.0 * x.abs() / expiry).sqrt()
    } else {
        time_value * (2.0 * std::f64::consts::PI).sqrt() / (forward * sqrt_t)
    }
    .clamp(lo, hi);

    for _ in 0..MAX_ITER {
        let v = otm(sigma);
        let resid = if v > 0.0 {
            v.ln() - target
        } else {
            f64::NEG_INFINITY
        };
        if resid == 0.0 {
            return Ok(sigma);
        }
        if resid > 0.0 {
            hi = sigma;
        } else {
            lo = sigma;
        }
        let (dp, _) = d_plus_minus(expiry, strike, forward, sigma);
        let vega = forward * normal::pdf(dp) * sqrt_t;
        let newton = if v > 0.0 && vega > 0.0 {
            sigma - resid * v / vega
        } else {
            f64::NAN
        };
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - sigma).abs() <= 1e-15 * sigma || hi - lo <= 1e-15 * sigma {
            return Ok(next);
        }
        sigma = next;
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITER,
        achieved: (otm(sigma) - time_value).abs(),
    })
}
