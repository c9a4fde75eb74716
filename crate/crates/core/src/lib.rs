//! Variance-optimal (quadratic) hedging of European claims written on
//! exponential or arithmetic processes with independent increments.
//!
//! The crate is organised bottom-up:
//!
//! * [`cumulants`] holds the Lévy drivers and their cumulant functions.
//! * [`pii`] turns a driver into a time-inhomogeneous log-price model.
//! * [`payoff`] represents claims as complex measures over exponents.
//! * [`fs_engine`] and [`arithmetic`] compute prices, hedge ratios and
//!   the minimal quadratic error.
//! * [`montecarlo`] backtests the resulting strategies on simulated paths.

// NaN-rejecting guards are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arithmetic;
pub mod cumulants;
pub mod error;
pub mod fs_engine;
pub mod montecarlo;
pub mod payoff;
pub mod pii;
pub mod quadrature;

pub use error::{HedgeError, Result};
pub use num_complex::Complex64;
