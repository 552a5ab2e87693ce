use proptest::prelude::*;

use rfr_sabr::black76::{black_price, implied_vol, BlackQuote};
use rfr_sabr::effective::{effective_params, rescale_time_to_exercise};
use rfr_sabr::hagan::hagan_implied_vol;
use rfr_sabr::model::psi;
use rfr_sabr::oracle::effective_params_quadrature;
use rfr_sabr::pricer::price_caplet;
use rfr_sabr::{AccrualPeriod, CapletSpec, CapletStyle, DecayExponent, SabrParams};

fn period(t0: f64, len: f64) -> AccrualPeriod {
    AccrualPeriod::new(t0, t0 + len).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn black_round_trip_when_well_conditioned(
        sigma in 0.05f64..1.0,
        x in -0.5f64..0.5,
        t in 0.1f64..5.0,
    ) {
        prop_assume!(x.abs() <= 2.0 * sigma * t.sqrt());
        let f = 0.05;
        let k = f * (-x).exp();
        let price = black_price(&BlackQuote::new(t, k, f, sigma)).unwrap();
        let back = implied_vol(t, k, f, price).unwrap();
        prop_assert!((back - sigma).abs() < 1e-10, "sigma {sigma} back {back}");
    }

    #[test]
    fn psi_is_a_nonincreasing_fraction(
        t0 in -2.0f64..2.0,
        len in 0.01f64..2.0,
        q in 0.01f64..20.0,
        a in 0.0f64..1.0,
        b in 0.0f64..1.0,
    ) {
        prop_assume!(t0 + len > 0.0);
        let per = period(t0, len);
        let q = DecayExponent::new(q).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let span = per.tau1().max(0.0) + 1.0;
        let s = per.tau1() - span * (1.0 - lo);
        let t = per.tau1() - span * (1.0 - hi);
        let (ps, pt) = (psi(s, &per, q).unwrap(), psi(t, &per, q).unwrap());
        prop_assert!((0.0..=1.0).contains(&ps) && (0.0..=1.0).contains(&pt));
        prop_assert!(pt <= ps);
    }

    #[test]
    fn effective_correlation_keeps_sign_and_bound(
        ratio in -1.0f64..0.99,
        q in 0.05f64..50.0,
        rho in -0.99f64..0.99,
        nu in 0.0f64..2.0,
    ) {
        let per = AccrualPeriod::new(ratio, 1.0).unwrap();
        let p = SabrParams::new(0.1, 1.0, rho, nu).unwrap();
        let e = effective_params(&p, &per, DecayExponent::new(q).unwrap()).unwrap();
        prop_assert!(e.rho_hat.abs() <= 1.0);
        prop_assert!(e.rho_hat == 0.0 || e.rho_hat.signum() == rho.signum());
        prop_assert!(e.alpha_hat > 0.0 && e.alpha_hat <= p.alpha);
        prop_assert!(e.nu_hat >= 0.0 && e.nu_hat <= p.nu * (1.0 + 1e-12));
    }

    #[test]
    fn rescaling_preserves_total_hagan_variance(
        t_new in 0.05f64..10.0,
        strike in 0.02f64..0.1,
        beta in 0.0f64..1.0,
    ) {
        let p = SabrParams::new(0.03, beta, -0.3, 0.4).unwrap();
        let per = AccrualPeriod::new(0.5, 1.0).unwrap();
        let e = effective_params(&p, &per, DecayExponent::new(1.5).unwrap()).unwrap();
        let moved = rescale_time_to_exercise(&e, t_new).unwrap();
        let a = hagan_implied_vol(1.0, strike, 0.05, &e.to_sabr(&p)).unwrap();
        let b = hagan_implied_vol(t_new, strike, 0.05, &moved.to_sabr(&p)).unwrap();
        prop_assert!((a - b * t_new.sqrt()).abs() < 1e-13, "{a} {}", b * t_new.sqrt());
    }

    #[test]
    fn backward_price_is_nonincreasing_in_strike(
        t0 in -0.4f64..2.0,
        q in 0.1f64..5.0,
        k in 0.03f64..0.08,
    ) {
        let p = SabrParams::new(0.1, 1.0, -0.5, 0.5).unwrap();
        let spec = |strike: f64| CapletSpec {
            strike,
            style: CapletStyle::Backward,
            period: period(t0, 0.5),
            discount: 0.97,
            forward_rate: 0.05,
        };
        let q = Some(DecayExponent::new(q).unwrap());
        let a = price_caplet(&spec(k), &p, q).unwrap().present_value;
        let b = price_caplet(&spec(k + 1e-3), &p, q).unwrap().present_value;
        prop_assert!(b <= a);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn closed_forms_match_quadrature(
        t0 in -0.9f64..3.0,
        len in 0.05f64..2.0,
        q in 0.1f64..8.0,
        rho in -0.95f64..0.95,
        nu in 0.05f64..1.5,
    ) {
        prop_assume!(t0 + len > 0.0);
        let p = SabrParams::new(0.1, 1.0, rho, nu).unwrap();
        let per = period(t0, len);
        let q = DecayExponent::new(q).unwrap();
        let c = effective_params(&p, &per, q).unwrap();
        let o = effective_params_quadrature(&p, &per, q).unwrap();
        prop_assert!((o.alpha_hat / c.alpha_hat - 1.0).abs() < 1e-8);
        prop_assert!((o.nu_hat / c.nu_hat - 1.0).abs() < 1e-8);
        prop_assert!((o.rho_hat - c.rho_hat).abs() < 1e-10);
    }
}
