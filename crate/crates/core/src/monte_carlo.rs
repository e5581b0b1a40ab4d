//! Monte Carlo oracle for the closed-form results.
//!
//! The log-price `x_t = ln S_t - mu t` follows
//! `dx = -sigma^2 theta(t) dt + sigma dW_{h(t)}`. Paths are stepped on the
//! uniform grid `t_k = kT/n` with the drift evaluated at step midpoints and
//! the noise increments taken from one exact joint mBm draw per path.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hurst::HurstFunction;
use crate::mbm::{block_rng, CovarianceKernel, MbmSampler, PATHS_PER_BLOCK};
use crate::numerics::{mean_and_variance, pairwise_sum};

/// Spot, physical drift, risk-free rate and volatility, all annualised.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarketParams {
    pub spot: f64,
    pub mu: f64,
    pub rate: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone)]
pub struct McConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub maturity: f64,
    pub market: MarketParams,
    pub hurst: HurstFunction,
}

impl McConfig {
    fn validate(&self) -> Result<()> {
        if self.n_paths == 0 || self.n_steps == 0 {
            return Err(Error::domain(
                "Monte Carlo needs n_paths >= 1 and n_steps >= 1",
            ));
        }
        if !(self.maturity > 0.0 && self.maturity.is_finite()) {
            return Err(Error::domain("Monte Carlo maturity must be positive"));
        }
        let m = &self.market;
        if !(m.spot > 0.0) || !(m.sigma >= 0.0) || !m.mu.is_finite() || !m.rate.is_finite() {
            return Err(Error::domain(
                "Monte Carlo needs spot > 0, sigma >= 0, finite rates",
            ));
        }
        Ok(())
    }

    fn step_grid(&self) -> Vec<f64> {
        let n = self.n_steps;
        (1..=n)
            .map(|k| self.maturity * k as f64 / n as f64)
            .collect()
    }

    /// Per-step drift `sigma^2 theta(t_k*) dt` at the step midpoints.
    fn drift_steps(&self) -> Result<Vec<f64>> {
        let dt = self.maturity / self.n_steps as f64;
        let s2 = self.market.sigma * self.market.sigma;
        (0..self.n_steps)
            .map(|k| {
                let mid = (k as f64 + 0.5) * dt;
                Ok(s2 * self.hurst.drift_factor(mid)? * dt)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub standard_error: f64,
    pub n_paths: usize,
}

impl McEstimate {
    /// Sample mean with standard error `s / sqrt(n)`.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        let (mean, var) = mean_and_variance(samples);
        Self {
            value: mean,
            standard_error: (var / n as f64).sqrt(),
            n_paths: n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McMoments {
    pub mean_s_t: McEstimate,
    pub var_s_t: McEstimate,
}

/// Log-price paths on the step grid; row `i` is path `i`.
pub fn simulate_log_price_paths(cfg: &McConfig) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let times = cfg.step_grid();
    let rows = run_blocks(cfg, |path| path.to_vec())?;
    Ok((times, rows))
}

/// Terminal log-prices `x_T` for every path.
pub fn simulate_terminal_log_price(cfg: &McConfig) -> Result<Vec<f64>> {
    run_blocks(cfg, |path| path[path.len() - 1])
}

fn run_blocks<T, F>(cfg: &McConfig, extract: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&[f64]) -> T + Sync,
{
    cfg.validate()?;
    let times = cfg.step_grid();
    let drift = cfg.drift_steps()?;
    let sigma = cfg.market.sigma;
    let x0 = cfg.market.spot.ln();
    let n = times.len();
    let sampler = if sigma > 0.0 {
        Some(MbmSampler::new(
            &CovarianceKernel::new(cfg.hurst.clone()),
            &times,
        )?)
    } else {
        None
    };
    let n_blocks = cfg.n_paths.div_ceil(PATHS_PER_BLOCK);
    let blocks: Vec<Vec<T>> = (0..n_blocks)
        .into_par_iter()
        .map(|block| {
            let start = block * PATHS_PER_BLOCK;
            let count = PATHS_PER_BLOCK.min(cfg.n_paths - start);
            let mut rng = block_rng(cfg.seed, block as u64);
            let mut z = vec![0.0; n];
            let mut w = vec![0.0; n];
            let mut x = vec![0.0; n];
            let mut out = Vec::with_capacity(count);
            for _ in 0..count {
                if let Some(s) = &sampler {
                    s.draw(&mut rng, &mut z, &mut w);
                }
                let mut prev_x = x0;
                let mut prev_w = 0.0;
                for k in 0..n {
                    prev_x = prev_x - drift[k] + sigma * (w[k] - prev_w);
                    prev_w = w[k];
                    x[k] = prev_x;
                }
                out.push(extract(&x));
            }
            out
        })
        .collect();
    Ok(blocks.into_iter().flatten().collect())
}

/// Actuarial call premium `E[(e^{-mu T} S_T - e^{-rT} K)^+]`.
pub fn mc_call_price(cfg: &McConfig, strike: f64) -> Result<McEstimate> {
    if !(strike >= 0.0) {
        return Err(Error::domain("strike must be >= 0"));
    }
    let terminal = simulate_terminal_log_price(cfg)?;
    Ok(call_estimate(cfg, &terminal, strike))
}

/// Call estimate from already simulated terminal log-prices.
pub fn call_estimate(cfg: &McConfig, terminal: &[f64], strike: f64) -> McEstimate {
    let t = cfg.maturity;
    let growth = (cfg.market.mu * t).exp();
    let pv_strike = strike * (-cfg.market.rate * t).exp();
    let payoffs: Vec<f64> = terminal
        .iter()
        .map(|&x| {
            let s_t = (x + cfg.market.mu * t).exp();
            (s_t / growth - pv_strike).max(0.0)
        })
        .collect();
    McEstimate::from_samples(&payoffs)
}

/// Mean and variance of `S_T` with standard errors.
pub fn mc_moments(cfg: &McConfig) -> Result<McMoments> {
    let terminal = simulate_terminal_log_price(cfg)?;
    Ok(moments_estimate(cfg, &terminal))
}

/// Moment estimates from already simulated terminal log-prices. The
/// variance standard error is `sqrt((m4 - s^4) / n)`.
pub fn moments_estimate(cfg: &McConfig, terminal: &[f64]) -> McMoments {
    let t = cfg.maturity;
    let prices: Vec<f64> = terminal
        .iter()
        .map(|&x| (x + cfg.market.mu * t).exp())
        .collect();
    let mean_s_t = McEstimate::from_samples(&prices);
    let n = prices.len();
    let m = mean_s_t.value;
    let sq: Vec<f64> = prices.iter().map(|p| (p - m) * (p - m)).collect();
    let var = if n > 1 {
        pairwise_sum(&sq) / (n - 1) as f64
    } else {
        0.0
    };
    let quart: Vec<f64> = sq.iter().map(|d| d * d).collect();
    let m4 = pairwise_sum(&quart) / n as f64;
    let var_s_t = McEstimate {
        value: var,
        standard_error: ((m4 - var * var).max(0.0) / n as f64).sqrt(),
        n_paths: n,
    };
    McMoments { mean_s_t, var_s_t }
}
