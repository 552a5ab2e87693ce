//! Standard normal distribution helpers.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Standard normal CDF, accurate in both tails.
#[inline]
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

#[inline]
pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}
