//! Multifractional Black-Scholes option pricing.
//!
//! The asset follows a geometric process driven by a multifractional
//! Brownian motion whose Hurst exponent `h(t)` is a deterministic function
//! of time. The crate provides:
//!
//! * [`hurst`]: constant, sinusoidal and tabulated Hurst functions and the
//!   time change `t^{2h(t)}` / drift factor derived from them;
//! * [`mbm`]: the mBm covariance kernel and exact path sampling;
//! * [`density`]: the closed-form log-price transition density, price
//!   moments and a Fokker-Planck residual check;
//! * [`pricer`]: the closed-form European call with fractional and classical
//!   reductions;
//! * [`monte_carlo`]: a path simulator used as an independent oracle;
//! * [`calibration`]: least-squares fitting and three-model comparison;
//! * [`cli`]: the `mfbs` command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod cli;
pub mod density;
pub mod error;
pub mod hurst;
pub mod mbm;
pub mod monte_carlo;
pub mod numerics;
pub mod optimize;
pub mod pricer;

pub use error::{Error, Result};
pub use hurst::HurstFunction;
