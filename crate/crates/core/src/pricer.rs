//! European call under multifractional diffusion, priced by the actuarial
//! approach:
//!
//! ```text
//! C = S0 N(d1) - K e^{-rT} N(d2)
//! d1 = [ln(S0/K) + rT + v/2] / sqrt(v),  d2 = d1 - sqrt(v),  v = sigma^2 T^{2h(T)}
//! ```
//!
//! The Hurst function enters only through the effective variance `v`.
//! `fractional_bs_price` and `classical_bs_price` are the constant-H and
//! `H = 1/2` reductions; the classical one is a separate code path.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hurst::HurstFunction;
use crate::numerics::norm_cdf;

/// Maturities below this are priced at intrinsic value.
pub const DEGENERATE_MATURITY: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct PricingInput<'a> {
    pub spot: f64,
    pub strike: f64,
    pub rate: f64,
    pub sigma: f64,
    pub maturity: f64,
    pub hurst: &'a HurstFunction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PricingResult {
    pub price: f64,
    pub d1: f64,
    pub d2: f64,
    pub effective_variance: f64,
    /// Set when the maturity is below [`DEGENERATE_MATURITY`] and the
    /// intrinsic value `max(S0 - K, 0)` was returned.
    #[serde(rename = "degenerate_flag")]
    pub degenerate: bool,
}

fn validate(spot: f64, strike: f64, rate: f64, sigma: f64, maturity: f64) -> Result<()> {
    if !(spot > 0.0 && spot.is_finite()) {
        return Err(Error::domain(format!("spot must be positive, got {spot}")));
    }
    if !(strike > 0.0 && strike.is_finite()) {
        return Err(Error::domain(format!(
            "strike must be positive, got {strike}"
        )));
    }
    if !rate.is_finite() {
        return Err(Error::domain("rate must be finite"));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    if !(maturity >= 0.0 && maturity.is_finite()) {
        return Err(Error::domain(format!(
            "maturity must be >= 0, got {maturity}"
        )));
    }
    Ok(())
}

// Black-type formula in terms of rT and total variance.
// Clamped to [max(S0 - K df, 0), S0] to absorb rounding.
fn black_call(spot: f64, strike: f64, rate_time: f64, variance: f64) -> (f64, f64, f64) {
    let discount = (-rate_time).exp();
    let forward_gap = (spot - strike * discount).max(0.0);
    if !(variance > 0.0) {
        // deterministic forward
        let d = if forward_gap > 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
        return (forward_gap, d, d);
    }
    let sd = variance.sqrt();
    let d1 = ((spot / strike).ln() + rate_time + 0.5 * variance) / sd;
    let d2 = d1 - sd;
    let price = spot * norm_cdf(d1) - strike * discount * norm_cdf(d2);
    (price.clamp(forward_gap, spot), d1, d2)
}

fn intrinsic(spot: f64, strike: f64) -> PricingResult {
    let d = if spot > strike {
        f64::INFINITY
    } else if spot < strike {
        f64::NEG_INFINITY
    } else {
        0.0
    };
    PricingResult {
        price: (spot - strike).max(0.0),
        d1: d,
        d2: d,
        effective_variance: 0.0,
        degenerate: true,
    }
}

/// Closed-form multifractional call price.
pub fn call_price(input: &PricingInput<'_>) -> Result<PricingResult> {
    let PricingInput {
        spot,
        strike,
        rate,
        sigma,
        maturity,
        hurst,
    } = *input;
    validate(spot, strike, rate, sigma, maturity)?;
    if maturity < DEGENERATE_MATURITY {
        return Ok(intrinsic(spot, strike));
    }
    let variance = sigma * sigma * hurst.time_change(maturity)?;
    let (price, d1, d2) = black_call(spot, strike, rate * maturity, variance);
    Ok(PricingResult {
        price,
        d1,
        d2,
        effective_variance: variance,
        degenerate: false,
    })
}

/// `(d1, d2)` for a positive maturity.
pub fn d_values(input: &PricingInput<'_>) -> Result<(f64, f64)> {
    if !(input.maturity > 0.0) {
        return Err(Error::domain(format!(
            "d-values need maturity > 0, got {}",
            input.maturity
        )));
    }
    let r = call_price(input)?;
    Ok((r.d1, r.d2))
}

/// Constant-Hurst (fractional) Black-Scholes price with `v = sigma^2 T^{2H}`.
pub fn fractional_bs_price(
    spot: f64,
    strike: f64,
    rate: f64,
    sigma: f64,
    hurst: f64,
    maturity: f64,
) -> Result<f64> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::domain(format!("H must lie in (0, 1), got {hurst}")));
    }
    validate(spot, strike, rate, sigma, maturity)?;
    if maturity < DEGENERATE_MATURITY {
        return Ok((spot - strike).max(0.0));
    }
    let variance = sigma * sigma * maturity.powf(2.0 * hurst);
    Ok(black_call(spot, strike, rate * maturity, variance).0)
}

/// Textbook Black-Scholes call.
pub fn classical_bs_price(
    spot: f64,
    strike: f64,
    rate: f64,
    sigma: f64,
    maturity: f64,
) -> Result<f64> {
    validate(spot, strike, rate, sigma, maturity)?;
    if maturity < DEGENERATE_MATURITY {
        return Ok((spot - strike).max(0.0));
    }
    let pv_strike = strike * (-rate * maturity).exp();
    let floor = (spot - pv_strike).max(0.0);
    let vol_sqrt_t = sigma * maturity.sqrt();
    if !(vol_sqrt_t > 0.0) {
        return Ok(floor);
    }
    let d1 = ((spot / strike).ln() + (rate + 0.5 * sigma * sigma) * maturity) / vol_sqrt_t;
    let d2 = d1 - vol_sqrt_t;
    let price = spot * norm_cdf(d1) - pv_strike * norm_cdf(d2);
    Ok(price.clamp(floor, spot))
}
