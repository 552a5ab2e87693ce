//! Backward-looking SABR model for risk-free-rate caplets.
//!
//! The forward rate `R(t)` of an accrual period `[τ0, τ1]` follows SABR
//! dynamics whose volatility is damped by a deterministic factor
//! `ψ(t) = min(1, (τ1 − t)/(τ1 − τ0))^q` once the period has started:
//!
//! ```text
//! dR(t) = ψ(t) σ(t) R(t)^β dB(t)
//! dσ(t) = ν σ(t) dW(t),   σ(0) = α,   dB dW = ρ dt
//! ```
//!
//! Forward-looking caplets (fixing at `τ0`) are priced with the standard
//! Hagan approximation. Backward-looking caplets (fixing at `τ1`) are priced
//! with the same approximation at closed-form effective parameters
//! `(α̂, ρ̂, ν̂)`, see [`effective`]. The [`oracle`] module recomputes those
//! parameters by quadrature and [`mc`] simulates the dynamics directly.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod black76;
pub mod calibration;
pub mod effective;
pub mod error;
pub mod hagan;
pub mod hull_white;
pub mod mc;
pub mod model;
pub mod normal;
pub(crate) mod optim;
pub mod oracle;
pub mod pricer;
pub(crate) mod quadrature;

pub use error::{Error, Result};
pub use model::{AccrualPeriod, CapletSpec, CapletStyle, DecayExponent, SabrParams};
