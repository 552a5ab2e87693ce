//! Present values of forward- and backward-looking caplets.

use serde::{Deserialize, Serialize};

use crate::black76;
use crate::effective::{self, EffectiveSabrParams, QLimit};
use crate::error::{Error, Result};
use crate::hagan;
use crate::model::{validate, CapletSpec, CapletStyle, DecayExponent, SabrParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapletResult {
    pub present_value: f64,
    /// Black vol of the quote; `None` when the payoff is already fixed.
    pub implied_vol: Option<f64>,
    /// Effective parameters, backward-looking caplets only.
    pub effective_params: Option<EffectiveSabrParams>,
    pub time_to_exercise: Option<f64>,
}

fn check(spec: &CapletSpec, p: &SabrParams, style: CapletStyle) -> Result<()> {
    if spec.style != style {
        return Err(Error::domain(format!(
            "expected a {style} caplet, got {}",
            spec.style
        )));
    }
    validate(p, spec).map_err(|v| {
        Error::Domain(
            v.iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("; "),
        )
    })
}

fn intrinsic(spec: &CapletSpec, effective_params: Option<EffectiveSabrParams>) -> CapletResult {
    CapletResult {
        present_value: spec.discount * (spec.forward_rate - spec.strike).max(0.0),
        implied_vol: None,
        effective_params,
        time_to_exercise: None,
    }
}

fn quote(spec: &CapletSpec, p: &SabrParams, expiry: f64) -> Result<(f64, f64)> {
    let vol = hagan::hagan_implied_vol(expiry, spec.strike, spec.forward_rate, p)?;
    let pv = spec.discount
        * black76::call_unchecked(
            expiry,
            spec.strike + p.shift,
            spec.forward_rate + p.shift,
            vol,
        );
    Ok((pv, vol))
}

/// Caplet on the term rate fixing at `τ0`.
///
/// Once `τ0 ≤ 0` the payoff `(R(τ0) − K)⁺` is known and `spec.forward_rate`
/// must carry the realised fixing.
pub fn price_forward_caplet(spec: &CapletSpec, p: &SabrParams) -> Result<CapletResult> {
    check(spec, p, CapletStyle::Forward)?;
    let t0 = spec.period.tau0();
    if t0 <= 0.0 {
        return Ok(intrinsic(spec, None));
    }
    let (pv, vol) = quote(spec, p, t0)?;
    Ok(CapletResult {
        present_value: pv,
        implied_vol: Some(vol),
        effective_params: None,
        time_to_exercise: Some(t0),
    })
}

/// Caplet on the compounded rate fixing at `τ1`, valid for either sign of
/// `τ0`.
pub fn price_backward_caplet(
    spec: &CapletSpec,
    p: &SabrParams,
    q: DecayExponent,
) -> Result<CapletResult> {
    check(spec, p, CapletStyle::Backward)?;
    let e = effective::effective_params(p, &spec.period, q)?;
    price_backward_caplet_effective(spec, p, &e)
}

/// Backward-looking caplet priced at given effective parameters (β and
/// shift from `p`), at the expiry the parameters are quoted against.
pub fn price_backward_caplet_effective(
    spec: &CapletSpec,
    p: &SabrParams,
    e: &EffectiveSabrParams,
) -> Result<CapletResult> {
    check(spec, p, CapletStyle::Backward)?;
    let (pv, vol) = quote(spec, &e.to_sabr(p), e.time_to_exercise)?;
    Ok(CapletResult {
        present_value: pv,
        implied_vol: Some(vol),
        effective_params: Some(*e),
        time_to_exercise: Some(e.time_to_exercise),
    })
}

/// Backward-looking caplet in the `q → ∞` limit.
pub fn price_backward_caplet_q_infinity(spec: &CapletSpec, p: &SabrParams) -> Result<CapletResult> {
    check(spec, p, CapletStyle::Backward)?;
    match effective::limit_q_to_infinity(p, &spec.period) {
        QLimit::Effective(e) => price_backward_caplet_effective(spec, p, &e),
        QLimit::NoResidualVolatility { .. } => Ok(intrinsic(spec, None)),
    }
}

/// Dispatches on `spec.style`; `q` is required for backward-looking caplets.
pub fn price_caplet(
    spec: &CapletSpec,
    p: &SabrParams,
    q: Option<DecayExponent>,
) -> Result<CapletResult> {
    match spec.style {
        CapletStyle::Forward => price_forward_caplet(spec, p),
        CapletStyle::Backward => {
            let q = q.ok_or_else(|| Error::domain("backward-looking caplet needs q"))?;
            price_backward_caplet(spec, p, q)
        }
    }
}

/// Backward minus forward present value for the same strike and period.
///
/// The exact prices satisfy `gap ≥ 0` before the period starts. The
/// approximation is not guaranteed to, so the gap is a diagnostic only.
pub fn jensen_gap(spec: &CapletSpec, p: &SabrParams, q: DecayExponent) -> Result<f64> {
    if spec.period.tau0() < 0.0 {
        return Err(Error::domain(
            "Jensen ordering only holds before the accrual period starts (tau0 >= 0)",
        ));
    }
    let backward = price_backward_caplet(
        &CapletSpec {
            style: CapletStyle::Backward,
            ..*spec
        },
        p,
        q,
    )?;
    let forward = price_forward_caplet(
        &CapletSpec {
            style: CapletStyle::Forward,
            ..*spec
        },
        p,
    )?;
    Ok(backward.present_value - forward.present_value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AccrualPeriod;

    fn study_params() -> SabrParams {
        SabrParams::new(0.10, 1.0, -0.5, 0.5).unwrap()
    }

    fn spec(strike: f64, style: CapletStyle, t0: f64, t1: f64) -> CapletSpec {
        CapletSpec {
            strike,
            style,
            period: AccrualPeriod::new(t0, t1).unwrap(),
            discount: 1.0,
            forward_rate: 0.05,
        }
    }

    fn q(v: f64) -> DecayExponent {
        DecayExponent::new(v).unwrap()
    }

    #[test]
    fn fixed_forward_caplet_is_intrinsic() {
        let s = CapletSpec {
            forward_rate: 0.06,
            discount: 0.99,
            ..spec(0.05, CapletStyle::Forward, -0.1, 0.4)
        };
        let r = price_forward_caplet(&s, &study_params()).unwrap();
        assert!((r.present_value - 0.0099).abs() < 1e-16);
        assert!(r.implied_vol.is_none() && r.time_to_exercise.is_none());
    }

    #[test]
    fn forward_caplet_at_study_parameters() {
        let r = price_forward_caplet(&spec(0.05, CapletStyle::Forward, 0.5, 1.0), &study_params())
            .unwrap();
        // Black(0.5, 0.05, 0.05, 0.1003385416…), mpmath
        assert!((r.present_value - 0.001_414_952_213_687_298_4).abs() < 1e-16);
        assert_eq!(r.time_to_exercise, Some(0.5));
        let far = price_forward_caplet(&spec(1.0, CapletStyle::Forward, 0.5, 1.0), &study_params())
            .unwrap();
        assert!(far.present_value < 1e-20);
    }

    #[test]
    fn backward_caplet_uses_effective_triple() {
        let p = study_params();
        let s = spec(0.05, CapletStyle::Backward, 0.5, 1.0);
        let r = price_backward_caplet(&s, &p, q(1.0)).unwrap();
        let e = r.effective_params.unwrap();
        assert!((e.alpha_hat - 0.082).abs() < 5e-4);
        let vol = hagan::hagan_implied_vol(1.0, 0.05, 0.05, &e.to_sabr(&p)).unwrap();
        assert_eq!(r.implied_vol, Some(vol));
        let bs = black76::call_unchecked(1.0, 0.05, 0.05, vol);
        assert_eq!(r.present_value, bs);
    }

    #[test]
    fn style_mismatch_and_invalid_inputs_are_rejected() {
        let p = study_params();
        assert!(price_forward_caplet(&spec(0.05, CapletStyle::Backward, 0.5, 1.0), &p).is_err());
        assert!(price_forward_caplet(&spec(-0.01, CapletStyle::Forward, 0.5, 1.0), &p).is_err());
        assert!(price_caplet(&spec(0.05, CapletStyle::Backward, 0.5, 1.0), &p, None).is_err());
    }

    #[test]
    fn infinite_q_prices_agree() {
        let p = study_params();
        for &k in &[0.03, 0.05, 0.07] {
            let b = price_backward_caplet_q_infinity(&spec(k, CapletStyle::Backward, 0.5, 1.0), &p)
                .unwrap();
            let f = price_forward_caplet(&spec(k, CapletStyle::Forward, 0.5, 1.0), &p).unwrap();
            assert!((b.present_value - f.present_value).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_length_period_matches_forward_caplet() {
        let p = study_params();
        for &k in &[0.03, 0.05, 0.08] {
            let b = price_backward_caplet(&spec(k, CapletStyle::Backward, 0.75, 0.75), &p, q(2.0))
                .unwrap();
            let f = price_forward_caplet(&spec(k, CapletStyle::Forward, 0.75, 0.75), &p).unwrap();
            assert!((b.present_value - f.present_value).abs() < 1e-12);
        }
        let near = price_backward_caplet(
            &spec(0.05, CapletStyle::Backward, 0.75 - 1e-9, 0.75),
            &p,
            q(2.0),
        )
        .unwrap();
        let f = price_forward_caplet(&spec(0.05, CapletStyle::Forward, 0.75, 0.75), &p).unwrap();
        assert!((near.present_value - f.present_value).abs() < 1e-10);
    }

    #[test]
    fn jensen_gap_cases() {
        let p = study_params();
        let s = spec(0.05, CapletStyle::Backward, 0.5, 1.0);
        assert!(jensen_gap(&s, &p, q(1.0)).unwrap() > 0.0);
        let deterministic = SabrParams::new(1e-9, 1.0, 0.0, 0.0).unwrap();
        assert!(jensen_gap(&s, &deterministic, q(1.0)).unwrap().abs() < 1e-10);
        assert!(jensen_gap(&spec(0.05, CapletStyle::Backward, -0.1, 0.4), &p, q(1.0)).is_err());
    }

    #[test]
    fn backward_price_continuous_across_period_start() {
        let p = study_params();
        let a = price_backward_caplet(&spec(0.05, CapletStyle::Backward, -1e-6, 0.5), &p, q(1.5))
            .unwrap();
        let b = price_backward_caplet(&spec(0.05, CapletStyle::Backward, 1e-6, 0.5), &p, q(1.5))
            .unwrap();
        assert!((a.present_value - b.present_value).abs() < 1e-8);
    }

    #[test]
    fn prices_decrease_and_are_convex_in_strike() {
        let p = study_params();
        for style in [CapletStyle::Backward, CapletStyle::Forward] {
            let pv: Vec<f64> = (0..=60)
                .map(|i| {
                    let k = 0.03 + 0.0005 * i as f64;
                    price_caplet(&spec(k, style, 0.5, 1.0), &p, Some(q(1.0)))
                        .unwrap()
                        .present_value
                })
                .collect();
            for w in pv.windows(3) {
                assert!(w[1] <= w[0]);
                assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-15);
            }
        }
    }

    #[test]
    fn result_respects_call_bounds() {
        let p = study_params();
        for &k in &[0.01, 0.05, 0.2] {
            let r = price_backward_caplet(&spec(k, CapletStyle::Backward, 0.5, 1.0), &p, q(1.0))
                .unwrap();
            assert!(r.present_value >= 0.0 && r.present_value <= 0.05);
        }
    }
}
