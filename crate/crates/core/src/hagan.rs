//! Hagan et al. (2002) Black implied-volatility approximation for SABR.

use crate::black76;
use crate::error::{Error, Result};
use crate::model::SabrParams;

/// `|ρ|` must stay this far from 1 for `χ(z)` to be well defined.
pub const RHO_EPS: f64 = 1e-10;

/// Below this `|z|` the ratio `z/χ(z)` is taken from its Taylor series.
const Z_SERIES: f64 = 1e-6;

/// `z/χ(z)` with `χ(z) = log((√(1 − 2ρz + z²) + z − ρ)/(1 − ρ))`.
pub(crate) fn z_over_chi(z: f64, rho: f64) -> f64 {
    if z.abs() < Z_SERIES {
        return 1.0 - 0.5 * rho * z + (2.0 - 3.0 * rho * rho) / 12.0 * z * z;
    }
    let s = (1.0 - 2.0 * rho * z + z * z).sqrt();
    let chi = if z < -1.0 {
        // s + z − ρ = (1 − ρ²)/(s − z + ρ); avoids cancellation for large negative z
        ((1.0 + rho) / (s - z + rho)).ln()
    } else {
        let s_minus_one = (z * z - 2.0 * rho * z) / (s + 1.0);
        ((s_minus_one + z) / (1.0 - rho)).ln_1p()
    };
    z / chi
}

/// Black implied volatility of the SABR model at expiry `t`, strike `k` and
/// forward `r`. Strike and forward are displaced by `p.shift`.
pub fn hagan_implied_vol(t: f64, k: f64, r: f64, p: &SabrParams) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("expiry must be > 0, got {t}")));
    }
    if let Some(v) = p.violations().first() {
        return Err(Error::Domain(v.to_string()));
    }
    if p.rho.abs() > 1.0 - RHO_EPS {
        return Err(Error::domain(format!(
            "|rho| must not exceed 1 - {RHO_EPS:e} in the Hagan formula, got {}",
            p.rho
        )));
    }
    let f = r + p.shift;
    let k = k + p.shift;
    if !(k > 0.0) {
        return Err(Error::domain(format!(
            "strike + shift must be > 0, got {k}"
        )));
    }
    if !(f > 0.0) {
        return Err(Error::domain(format!(
            "forward + shift must be > 0, got {f}"
        )));
    }

    let SabrParams {
        alpha,
        beta,
        rho,
        nu,
        ..
    } = *p;
    let omb = 1.0 - beta;
    let omb2 = omb * omb;
    let x = (f / k).ln();
    let fk_half = (f * k).powf(0.5 * omb);
    let x2 = x * x;
    let denom = 1.0 + omb2 / 24.0 * x2 + omb2 * omb2 / 1920.0 * x2 * x2;
    let z = nu / alpha * fk_half * x;
    let ratio = z_over_chi(z, rho);
    let correction = 1.0
        + (omb2 / 24.0 * alpha * alpha / (fk_half * fk_half)
            + 0.25 * rho * beta * nu * alpha / fk_half
            + (2.0 - 3.0 * rho * rho) / 24.0 * nu * nu)
            * t;
    let vol = alpha / (fk_half * denom) * ratio * correction;
    if !(vol > 0.0) || !vol.is_finite() {
        return Err(Error::domain(format!(
            "Hagan approximation gives non-positive vol {vol} (T={t}, K={k}, R={f})"
        )));
    }
    Ok(vol)
}

/// Present value `discount · π(t, K, R, σ_hagan)` of a caplet.
pub fn sabr_caplet_price(t: f64, k: f64, r: f64, p: &SabrParams, discount: f64) -> Result<f64> {
    if !(discount > 0.0 && discount <= 1.0) {
        return Err(Error::domain(format!(
            "discount must be in (0,1], got {discount}"
        )));
    }
    let vol = hagan_implied_vol(t, k, r, p)?;
    Ok(discount * black76::call_unchecked(t, k + p.shift, r + p.shift, vol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::black76::{black_price, BlackQuote};

    fn params(alpha: f64, beta: f64, rho: f64, nu: f64) -> SabrParams {
        SabrParams::new(alpha, beta, rho, nu).unwrap()
    }

    #[test]
    fn lognormal_reduction_is_exact() {
        for &rho in &[-0.9, 0.0, 0.7] {
            let p = params(0.137, 1.0, rho, 0.0);
            for &k in &[0.01, 0.05, 0.2] {
                assert_eq!(hagan_implied_vol(2.0, k, 0.05, &p).unwrap(), 0.137);
            }
        }
    }

    #[test]
    fn atm_branch_value() {
        // α(1 + [ρνα/4 + (2 − 3ρ²)ν²/24]T) = 0.1 · (1 + (−0.00625 + 0.01302083)·0.5)
        let v = hagan_implied_vol(0.5, 0.05, 0.05, &params(0.10, 1.0, -0.5, 0.5)).unwrap();
        assert!((v - 0.100_338_541_666_666_67).abs() < 1e-15);
    }

    #[test]
    fn general_branch_matches_independent_evaluation() {
        // 40-digit mpmath evaluation of the same expression
        let v = hagan_implied_vol(1.0, 0.04, 0.05, &params(0.03, 0.5, -0.3, 0.4)).unwrap();
        assert!((v - 0.162_759_115_394_506_8).abs() < 1e-12);
    }

    #[test]
    fn z_over_chi_series_matches_direct_form_at_switch() {
        for &rho in &[-0.9, -0.3, 0.0, 0.5, 0.95] {
            let lo = z_over_chi(Z_SERIES * (1.0 - 1e-9), rho);
            let hi = z_over_chi(Z_SERIES * (1.0 + 1e-9), rho);
            assert!((lo - hi).abs() < 1e-12, "rho={rho}: {lo} vs {hi}");
            let lo = z_over_chi(-Z_SERIES * (1.0 - 1e-9), rho);
            let hi = z_over_chi(-Z_SERIES * (1.0 + 1e-9), rho);
            assert!((lo - hi).abs() < 1e-12, "rho={rho}");
        }
    }

    #[test]
    fn z_over_chi_large_arguments_are_finite() {
        for &rho in &[-0.99, 0.0, 0.99] {
            for &z in &[-50.0, -2.0, -1.0, 1.0, 2.0, 50.0] {
                let v = z_over_chi(z, rho);
                assert!(v.is_finite() && v > 0.0, "z={z} rho={rho} v={v}");
            }
        }
    }

    #[test]
    fn atm_continuity() {
        let p = params(0.03, 0.5, -0.3, 0.4);
        let r = 0.05;
        let atm = hagan_implied_vol(1.0, r, r, &p).unwrap();
        let h = 1e-4;
        let slope = (hagan_implied_vol(1.0, r * (1.0 + h), r, &p).unwrap()
            - hagan_implied_vol(1.0, r * (1.0 - h), r, &p).unwrap())
            / (2.0 * h);
        for &eps in &[1e-5, 1e-7, 1e-9] {
            let v = hagan_implied_vol(1.0, r * (1.0 + eps), r, &p).unwrap();
            assert!((v - atm - slope * eps).abs() < 1e-9, "eps={eps}");
        }
    }

    #[test]
    fn beta_one_scale_invariance() {
        let p = params(0.2, 1.0, -0.4, 0.6);
        for &k in &[0.02, 0.05, 0.09] {
            let base = hagan_implied_vol(1.5, k, 0.05, &p).unwrap();
            for &lambda in &[0.1, 10.0] {
                let scaled = hagan_implied_vol(1.5, lambda * k, lambda * 0.05, &p).unwrap();
                assert!((scaled - base).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn smile_symmetric_for_zero_correlation() {
        let p = params(0.2, 1.0, 0.0, 0.6);
        let r: f64 = 0.05;
        for &x in &[0.01_f64, 0.1, 0.5, 1.0] {
            let up = hagan_implied_vol(1.0, r * (-x).exp(), r, &p).unwrap();
            let dn = hagan_implied_vol(1.0, r * x.exp(), r, &p).unwrap();
            assert!((up - dn).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_boundary_correlation_and_negative_strikes() {
        assert!(hagan_implied_vol(1.0, 0.05, 0.05, &params(0.1, 1.0, 1.0, 0.3)).is_err());
        assert!(hagan_implied_vol(1.0, -0.01, 0.05, &params(0.1, 1.0, 0.0, 0.3)).is_err());
        let shifted = SabrParams::with_shift(0.1, 1.0, 0.0, 0.3, 0.02).unwrap();
        assert!(hagan_implied_vol(1.0, -0.01, 0.05, &shifted).is_ok());
        assert!(hagan_implied_vol(1.0, -0.02, 0.05, &shifted).is_err());
    }

    #[test]
    fn caplet_price_composition() {
        let p = params(0.10, 1.0, -0.5, 0.5);
        let v = sabr_caplet_price(0.5, 0.05, 0.05, &p, 1.0).unwrap();
        let vol = hagan_implied_vol(0.5, 0.05, 0.05, &p).unwrap();
        let direct = black_price(&BlackQuote::new(0.5, 0.05, 0.05, vol)).unwrap();
        assert_eq!(v, direct);
        assert!((v - 0.001_414_952_213_687_298_4).abs() < 1e-16);
        let d = sabr_caplet_price(0.5, 0.05, 0.05, &p, 0.97).unwrap();
        assert_eq!(d, 0.97 * v);
    }
}
