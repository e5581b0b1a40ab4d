//! Closed-form transition density of the log-price `x_t = ln S_t - mu t`.
//!
//! Under the time change `v(t) = sigma^2 t^{2h(t)}` the density is Gaussian
//! with mean `x0 - v/2` and variance `v`. It solves
//!
//! ```text
//! dP/dt = sigma^2 theta(t) (dP/dx + d^2P/dx^2)
//! ```
//!
//! which [`fpe_residual`] checks by central finite differences.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::hurst::HurstFunction;
use crate::numerics::integrate;

#[derive(Debug, Clone)]
pub struct DensityParams {
    x0: f64,
    sigma: f64,
    hurst: HurstFunction,
}

impl DensityParams {
    pub fn new(x0: f64, sigma: f64, hurst: HurstFunction) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() || !x0.is_finite() {
            return Err(Error::domain(format!(
                "density needs finite x0 and sigma > 0 (x0 = {x0}, sigma = {sigma})"
            )));
        }
        Ok(Self { x0, sigma, hurst })
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn hurst(&self) -> &HurstFunction {
        &self.hurst
    }

    /// Log-price variance `sigma^2 t^{2h(t)}`.
    pub fn log_variance(&self, t: f64) -> Result<f64> {
        Ok(self.sigma * self.sigma * self.hurst.time_change(t)?)
    }

    /// Log-price mean `x0 - sigma^2 t^{2h(t)} / 2`.
    pub fn log_mean(&self, t: f64) -> Result<f64> {
        Ok(self.x0 - 0.5 * self.log_variance(t)?)
    }

    /// `P(x, t)`; `t` must be positive.
    pub fn pdf(&self, x: f64, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::domain(format!(
                "density is a point mass at t = 0; pdf needs t > 0, got {t}"
            )));
        }
        let v = self.log_variance(t)?;
        let z = x - self.x0 + 0.5 * v;
        Ok((-z * z / (2.0 * v)).exp() / (2.0 * PI * v).sqrt())
    }
}

/// `E[S_T] = S0 e^{mu T}`.
pub fn mean_price(spot: f64, mu: f64, maturity: f64) -> f64 {
    spot * (mu * maturity).exp()
}

/// `Var[S_T] = S0^2 e^{2 mu T} (e^{sigma^2 T^{2h(T)}} - 1)`.
pub fn variance_price(
    spot: f64,
    mu: f64,
    sigma: f64,
    hurst: &HurstFunction,
    maturity: f64,
) -> Result<f64> {
    if !(spot > 0.0) || !(sigma > 0.0) {
        return Err(Error::domain("variance_price needs spot > 0 and sigma > 0"));
    }
    let v = sigma * sigma * hurst.time_change(maturity)?;
    Ok(spot * spot * (2.0 * mu * maturity).exp() * v.exp_m1())
}

/// `dP/dt - sigma^2 theta(t) (dP/dx + d^2P/dx^2)` from central differences
/// with steps `dx`, `dt`. Second order in both steps.
pub fn fpe_residual(p: &DensityParams, x: f64, t: f64, dx: f64, dt: f64) -> Result<f64> {
    if !(dx > 0.0 && dt > 0.0) {
        return Err(Error::domain("finite-difference steps must be positive"));
    }
    if !(t > dt) {
        return Err(Error::domain(format!(
            "need t > dt, got t = {t}, dt = {dt}"
        )));
    }
    let centre = p.pdf(x, t)?;
    let dp_dt = (p.pdf(x, t + dt)? - p.pdf(x, t - dt)?) / (2.0 * dt);
    let right = p.pdf(x + dx, t)?;
    let left = p.pdf(x - dx, t)?;
    let dp_dx = (right - left) / (2.0 * dx);
    let d2p_dx2 = (right - 2.0 * centre + left) / (dx * dx);
    let theta = p.hurst.drift_factor(t)?;
    Ok(dp_dt - p.sigma * p.sigma * theta * (dp_dx + d2p_dx2))
}

/// Price moments `(E[S_T], Var[S_T])` obtained by integrating
/// `e^{k(x + mu T)}` against [`DensityParams::pdf`] with adaptive
/// quadrature. Independent of the closed forms above.
pub fn quadrature_price_moments(p: &DensityParams, mu: f64, maturity: f64) -> Result<(f64, f64)> {
    let v = p.log_variance(maturity)?;
    let sd = v.sqrt();
    let mean = p.log_mean(maturity)?;
    // the e^{2x} tilt moves mass up by 2v
    let (a, b) = (mean - 12.0 * sd, mean + 2.0 * v + 12.0 * sd);
    let pdf = |x: f64| p.pdf(x, maturity).unwrap_or(0.0);
    let scale = (p.x0 + mu * maturity).exp();
    let tol = 1e-13;
    let first = integrate(|x| (x - p.x0).exp() * pdf(x), a, b, tol);
    let centred = integrate(|x| ((x - p.x0).exp() - first).powi(2) * pdf(x), a, b, tol);
    let m1 = scale * first;
    let var = scale * scale * centred;
    Ok((m1, var))
}
