//! Least-squares calibration of the three nested call-pricing models to a
//! set of option quotes:
//!
//! * multifractional: `h(t) = A cos(2 pi f t + B) + C`, plus `sigma`;
//! * fractional: constant `H`, plus `sigma`;
//! * classical: `sigma` with `H = 1/2`.
//!
//! Box constraints are handled by a logistic change of variables and the
//! minimisation is a multi-start Nelder-Mead. Maturities follow the
//! 252-trading-day convention.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hurst::HurstFunction;
use crate::numerics::{halton, logit, sigmoid};
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::pricer::{call_price, PricingInput};

pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

/// Six-week (30 trading day) cycle, in cycles per year.
pub const DEFAULT_FREQUENCY: f64 = TRADING_DAYS_PER_YEAR / 30.0;

/// Two mse values closer than this are treated as equal when ranking.
pub const MSE_TIE_TOLERANCE: f64 = 1e-9;

// keeps C -/+ |A| strictly inside the box after rounding
const AMPLITUDE_MARGIN: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionQuote {
    pub maturity_days: u32,
    pub strike: f64,
    pub mid_price: f64,
}

impl OptionQuote {
    pub fn maturity_years(&self) -> f64 {
        self.maturity_days as f64 / TRADING_DAYS_PER_YEAR
    }
}

/// Call quotes sharing one spot and one risk-free rate, sorted by maturity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuoteSet {
    quotes: Vec<OptionQuote>,
    spot: f64,
    rate: f64,
}

impl QuoteSet {
    pub fn new(mut quotes: Vec<OptionQuote>, spot: f64, rate: f64) -> Result<Self> {
        if quotes.is_empty() {
            return Err(Error::EmptyInput("quote set has no quotes".into()));
        }
        if !(spot > 0.0 && spot.is_finite()) || !rate.is_finite() {
            return Err(Error::domain("quote set needs spot > 0 and a finite rate"));
        }
        for q in &quotes {
            if q.maturity_days == 0 {
                return Err(Error::domain("quote maturity must be at least one day"));
            }
            if !(q.strike > 0.0 && q.strike.is_finite()) {
                return Err(Error::domain(format!(
                    "quote strike must be positive, got {}",
                    q.strike
                )));
            }
            if !(q.mid_price > 0.0 && q.mid_price.is_finite()) {
                return Err(Error::domain(format!(
                    "quote mid price must be positive, got {}",
                    q.mid_price
                )));
            }
        }
        quotes.sort_by_key(|q| q.maturity_days);
        Ok(Self { quotes, spot, rate })
    }

    pub fn quotes(&self) -> &[OptionQuote] {
        &self.quotes
    }

    pub fn spot(&self) -> f64 {
        self.spot
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn len(&self) -> usize {
        self.quotes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quotes.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Multifractional,
    Fractional,
    Classical,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [
        ModelKind::Multifractional,
        ModelKind::Fractional,
        ModelKind::Classical,
    ];

    pub fn parameter_count(self) -> usize {
        match self {
            ModelKind::Multifractional => 4,
            ModelKind::Fractional => 2,
            ModelKind::Classical => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Multifractional => "multifractional",
            ModelKind::Fractional => "fractional",
            ModelKind::Classical => "classical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    Multifractional {
        amplitude: f64,
        phase: f64,
        level: f64,
        sigma: f64,
        frequency: f64,
    },
    Fractional {
        hurst: f64,
        sigma: f64,
    },
    Classical {
        sigma: f64,
    },
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Multifractional { .. } => ModelKind::Multifractional,
            ModelSpec::Fractional { .. } => ModelKind::Fractional,
            ModelSpec::Classical { .. } => ModelKind::Classical,
        }
    }

    pub fn sigma(&self) -> f64 {
        match *self {
            ModelSpec::Multifractional { sigma, .. }
            | ModelSpec::Fractional { sigma, .. }
            | ModelSpec::Classical { sigma } => sigma,
        }
    }

    /// The model's Hurst function; fails if the parameters leave `(0, 1)`.
    pub fn hurst_function(&self) -> Result<HurstFunction> {
        match *self {
            ModelSpec::Multifractional {
                amplitude,
                phase,
                level,
                frequency,
                ..
            } => HurstFunction::sinusoidal(amplitude, phase, level, frequency),
            ModelSpec::Fractional { hurst, .. } => HurstFunction::constant(hurst),
            ModelSpec::Classical { .. } => HurstFunction::constant(0.5),
        }
    }

    fn hurst_function_within(&self, lower: f64, upper: f64) -> Result<HurstFunction> {
        match *self {
            ModelSpec::Multifractional {
                amplitude,
                phase,
                level,
                frequency,
                ..
            } => {
                HurstFunction::sinusoidal_bounded(amplitude, phase, level, frequency, lower, upper)
            }
            ModelSpec::Fractional { hurst, .. } if !(lower..=upper).contains(&hurst) => Err(
                Error::domain(format!("H = {hurst} outside [{lower}, {upper}]")),
            ),
            _ => self.hurst_function(),
        }
    }

    /// `A >= 0` and `B` in `[0, 2 pi)`; `(A, B)` and `(-A, B + pi)` describe
    /// the same curve.
    pub fn canonical(self) -> Self {
        match self {
            ModelSpec::Multifractional {
                amplitude,
                phase,
                level,
                sigma,
                frequency,
            } => {
                let (amplitude, phase) = if amplitude < 0.0 {
                    (-amplitude, phase + PI)
                } else {
                    (amplitude, phase)
                };
                ModelSpec::Multifractional {
                    amplitude,
                    phase: phase.rem_euclid(2.0 * PI),
                    level,
                    sigma,
                    frequency,
                }
            }
            other => other,
        }
    }

    fn validate(&self) -> Result<HurstFunction> {
        let sigma = self.sigma();
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::domain(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        self.hurst_function()
    }
}

/// Model prices for every quote, in quote order.
pub fn model_prices(spec: &ModelSpec, quotes: &QuoteSet) -> Result<Vec<f64>> {
    let hurst = spec.validate()?;
    prices_with(&hurst, spec.sigma(), quotes)
}

fn prices_with(hurst: &HurstFunction, sigma: f64, quotes: &QuoteSet) -> Result<Vec<f64>> {
    quotes
        .quotes
        .iter()
        .map(|q| {
            call_price(&PricingInput {
                spot: quotes.spot,
                strike: q.strike,
                rate: quotes.rate,
                sigma,
                maturity: q.maturity_years(),
                hurst,
            })
            .map(|r| r.price)
        })
        .collect()
}

fn mse_of(prices: &[f64], quotes: &QuoteSet) -> f64 {
    let sum: f64 = prices
        .iter()
        .zip(&quotes.quotes)
        .map(|(p, q)| (p - q.mid_price) * (p - q.mid_price))
        .sum();
    sum / prices.len() as f64
}

/// Mean squared pricing error of `spec` over the quotes.
pub fn objective(spec: &ModelSpec, quotes: &QuoteSet) -> Result<f64> {
    Ok(mse_of(&model_prices(spec, quotes)?, quotes))
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationConfig {
    pub hurst_lower: f64,
    pub hurst_upper: f64,
    pub sigma_lower: f64,
    pub sigma_upper: f64,
    /// Number of Nelder-Mead starts, including any warm start.
    pub restarts: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Sinusoid frequency in cycles per year (not calibrated).
    pub frequency: f64,
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            hurst_lower: 0.05,
            hurst_upper: 0.95,
            sigma_lower: 1e-4,
            sigma_upper: 5.0,
            restarts: 16,
            max_iterations: 2000,
            tolerance: 1e-10,
            frequency: DEFAULT_FREQUENCY,
            seed: 0,
        }
    }
}

impl CalibrationConfig {
    fn validate(&self) -> Result<()> {
        if !(self.hurst_lower > 0.0
            && self.hurst_lower < self.hurst_upper
            && self.hurst_upper < 1.0)
        {
            return Err(Error::domain(
                "Hurst box must satisfy 0 < lower < upper < 1",
            ));
        }
        if !(self.sigma_lower > 0.0
            && self.sigma_lower < self.sigma_upper
            && self.sigma_upper.is_finite())
        {
            return Err(Error::domain("sigma box must satisfy 0 < lower < upper"));
        }
        if self.restarts == 0 || self.max_iterations == 0 {
            return Err(Error::domain(
                "restarts and max_iterations must be positive",
            ));
        }
        if !(self.tolerance >= 0.0) || !(self.frequency.is_finite()) {
            return Err(Error::domain("tolerance must be >= 0 and frequency finite"));
        }
        Ok(())
    }

    // centred so that u = 0 maps exactly onto the box midpoint
    fn unit_to_hurst(&self, u: f64) -> f64 {
        let mid = 0.5 * (self.hurst_lower + self.hurst_upper);
        let half = 0.5 * (self.hurst_upper - self.hurst_lower);
        (mid + half * (2.0 * sigmoid(u) - 1.0)).clamp(self.hurst_lower, self.hurst_upper)
    }

    fn hurst_to_unit(&self, h: f64) -> f64 {
        let mid = 0.5 * (self.hurst_lower + self.hurst_upper);
        let half = 0.5 * (self.hurst_upper - self.hurst_lower);
        logit(0.5 * ((h - mid) / half + 1.0))
    }

    fn unit_to_sigma(&self, u: f64) -> f64 {
        self.sigma_lower + (self.sigma_upper - self.sigma_lower) * sigmoid(u)
    }

    fn sigma_to_unit(&self, s: f64) -> f64 {
        logit((s - self.sigma_lower) / (self.sigma_upper - self.sigma_lower))
    }

    fn half_width(&self, level: f64) -> f64 {
        (level - self.hurst_lower)
            .min(self.hurst_upper - level)
            .max(0.0)
            * AMPLITUDE_MARGIN
    }

    /// Unconstrained coordinates to a model that respects the box.
    fn decode(&self, kind: ModelKind, u: &[f64]) -> ModelSpec {
        match kind {
            ModelKind::Classical => ModelSpec::Classical {
                sigma: self.unit_to_sigma(u[0]),
            },
            ModelKind::Fractional => ModelSpec::Fractional {
                hurst: self.unit_to_hurst(u[0]),
                sigma: self.unit_to_sigma(u[1]),
            },
            ModelKind::Multifractional => {
                let level = self.unit_to_hurst(u[0]);
                ModelSpec::Multifractional {
                    amplitude: (2.0 * sigmoid(u[1]) - 1.0) * self.half_width(level),
                    phase: u[2],
                    level,
                    sigma: self.unit_to_sigma(u[3]),
                    frequency: self.frequency,
                }
            }
        }
    }

    /// Inverse of [`Self::decode`]; a nested model is embedded in a richer
    /// `kind` (`H = 1/2`, `A = 0`).
    fn encode(&self, kind: ModelKind, spec: &ModelSpec) -> Vec<f64> {
        let (amplitude, phase, level, sigma) = match *spec {
            ModelSpec::Multifractional {
                amplitude,
                phase,
                level,
                sigma,
                ..
            } => (amplitude, phase, level, sigma),
            ModelSpec::Fractional { hurst, sigma } => (0.0, 0.0, hurst, sigma),
            ModelSpec::Classical { sigma } => (0.0, 0.0, 0.5, sigma),
        };
        match kind {
            ModelKind::Classical => vec![self.sigma_to_unit(sigma)],
            ModelKind::Fractional => vec![self.hurst_to_unit(level), self.sigma_to_unit(sigma)],
            ModelKind::Multifractional => {
                let u_level = self.hurst_to_unit(level);
                let half = self.half_width(self.unit_to_hurst(u_level));
                let u_amp = if half > 0.0 && amplitude != 0.0 {
                    logit(0.5 * (amplitude / half + 1.0))
                } else {
                    0.0
                };
                vec![u_level, u_amp, phase, self.sigma_to_unit(sigma)]
            }
        }
    }

    /// Quasi-random start `index` in unconstrained coordinates.
    fn start_point(&self, kind: ModelKind, index: u64) -> Vec<f64> {
        let p = halton(index, kind.parameter_count());
        let squeeze = |x: f64| logit(0.05 + 0.9 * x);
        match kind {
            ModelKind::Multifractional => {
                vec![squeeze(p[0]), squeeze(p[1]), 2.0 * PI * p[2], squeeze(p[3])]
            }
            _ => p.into_iter().map(squeeze).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationResult {
    pub model: ModelSpec,
    pub mse: f64,
    pub model_prices: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub restarts_used: usize,
    pub converged: bool,
}

impl CalibrationResult {
    pub fn kind(&self) -> ModelKind {
        self.model.kind()
    }
}

struct RunOutcome {
    u: Vec<f64>,
    mse: f64,
    iterations: usize,
    evaluations: usize,
    converged: bool,
}

/// Calibrates one model kind. See [`calibrate_observed`].
pub fn calibrate(
    quotes: &QuoteSet,
    kind: ModelKind,
    config: &CalibrationConfig,
) -> Result<CalibrationResult> {
    calibrate_observed(quotes, kind, config, None, &|_| {})
}

/// Multi-start Nelder-Mead calibration. When `warm_start` is given it is
/// the first start (a nested model is embedded with `A = 0` or
/// `H = 1/2`), so the result is never worse than it. Every model handed to
/// the pricer is passed to `observer` first.
pub fn calibrate_observed(
    quotes: &QuoteSet,
    kind: ModelKind,
    config: &CalibrationConfig,
    warm_start: Option<&ModelSpec>,
    observer: &(dyn Fn(&ModelSpec) + Sync),
) -> Result<CalibrationResult> {
    config.validate()?;
    let (lower, upper) = (config.hurst_lower, config.hurst_upper);
    let eval = |u: &[f64]| -> f64 {
        let spec = config.decode(kind, u);
        let Ok(hurst) = spec.hurst_function_within(lower, upper) else {
            return f64::INFINITY;
        };
        observer(&spec);
        match prices_with(&hurst, spec.sigma(), quotes) {
            Ok(p) => mse_of(&p, quotes),
            Err(_) => f64::INFINITY,
        }
    };

    let starts: Vec<Vec<f64>> = (0..config.restarts)
        .map(|i| match (i, warm_start) {
            (0, Some(spec)) => config.encode(kind, spec),
            _ => config.start_point(kind, 1 + config.seed + i as u64),
        })
        .collect();
    let steps: Vec<f64> = vec![0.5; kind.parameter_count()];
    let options = NelderMeadOptions {
        max_iterations: config.max_iterations,
        tolerance: config.tolerance,
    };

    let runs: Vec<RunOutcome> = starts
        .par_iter()
        .map(|x0| {
            let r = nelder_mead(eval, x0, &steps, &options);
            RunOutcome {
                u: r.x,
                mse: r.f,
                iterations: r.iterations,
                evaluations: r.evaluations,
                converged: r.converged,
            }
        })
        .collect();

    // lowest mse wins, ties go to the earliest restart
    let best_index = runs.iter().enumerate().fold(
        0,
        |best, (i, r)| if r.mse < runs[best].mse { i } else { best },
    );
    let best = &runs[best_index];
    let model = config.decode(kind, &best.u);
    let prices = model_prices(&model, quotes)?;
    let result = CalibrationResult {
        model: model.canonical(),
        mse: mse_of(&prices, quotes),
        model_prices: prices,
        iterations: best.iterations,
        evaluations: runs.iter().map(|r| r.evaluations).sum(),
        restarts_used: runs.len(),
        converged: best.converged
            || runs
                .iter()
                .any(|r| r.converged && r.mse <= best.mse + config.tolerance),
    };
    if !result.converged {
        return Err(Error::NonConvergence(Box::new(result)));
    }
    Ok(result)
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelFailure {
    pub model: ModelKind,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelComparison {
    /// Ascending mse; near-ties (within [`MSE_TIE_TOLERANCE`]) prefer fewer
    /// parameters.
    pub ranked: Vec<CalibrationResult>,
    pub failures: Vec<ModelFailure>,
}

impl ModelComparison {
    pub fn get(&self, kind: ModelKind) -> Option<&CalibrationResult> {
        self.ranked.iter().find(|r| r.kind() == kind)
    }
}

/// Calibrates classical, fractional and multifractional models in that
/// order, warm-starting each from the previous optimum, and ranks them.
/// A model that fails to converge still reports its best run.
pub fn compare_models(quotes: &QuoteSet, config: &CalibrationConfig) -> Result<ModelComparison> {
    config.validate()?;
    let mut results: Vec<CalibrationResult> = Vec::new();
    let mut failures = Vec::new();
    let mut nested: Option<ModelSpec> = None;
    for kind in [
        ModelKind::Classical,
        ModelKind::Fractional,
        ModelKind::Multifractional,
    ] {
        let outcome = calibrate_observed(quotes, kind, config, nested.as_ref(), &|_| {});
        let result = match outcome {
            Ok(r) => Some(r),
            Err(Error::NonConvergence(best)) => {
                failures.push(ModelFailure {
                    model: kind,
                    message: format!("did not converge (best mse {:.6e})", best.mse),
                });
                Some(*best)
            }
            Err(e) => {
                failures.push(ModelFailure {
                    model: kind,
                    message: e.to_string(),
                });
                None
            }
        };
        if let Some(r) = result {
            nested = Some(r.model);
            results.push(r);
        }
    }
    results.sort_by(|a, b| {
        if (a.mse - b.mse).abs() <= MSE_TIE_TOLERANCE {
            a.kind().parameter_count().cmp(&b.kind().parameter_count())
        } else {
            a.mse.total_cmp(&b.mse)
        }
    });
    Ok(ModelComparison {
        ranked: results,
        failures,
    })
}

/// Quotes priced by `spec` at each maturity (trading days) with additive
/// Gaussian noise of standard deviation `noise_std`. Noisy prices are
/// floored at `1e-8` to stay valid quotes.
pub fn generate_synthetic_quotes(
    spec: &ModelSpec,
    spot: f64,
    rate: f64,
    strike: f64,
    maturities_days: &[u32],
    noise_std: f64,
    seed: u64,
) -> Result<QuoteSet> {
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::domain("noise_std must be >= 0"));
    }
    let hurst = spec.validate()?;
    let noise = Normal::new(0.0, noise_std).map_err(|e| Error::domain(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let quotes = maturities_days
        .iter()
        .map(|&days| {
            let price = call_price(&PricingInput {
                spot,
                strike,
                rate,
                sigma: spec.sigma(),
                maturity: days as f64 / TRADING_DAYS_PER_YEAR,
                hurst: &hurst,
            })?
            .price;
            let noisy = if noise_std > 0.0 {
                (price + noise.sample(&mut rng)).max(1e-8)
            } else {
                price
            };
            Ok(OptionQuote {
                maturity_days: days,
                strike,
                mid_price: noisy,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    QuoteSet::new(quotes, spot, rate)
}

/// `n` maturities (trading days) spread evenly over `[first, last]`.
pub fn maturity_ladder(first: u32, last: u32, n: usize) -> Vec<u32> {
    if n <= 1 {
        return vec![first];
    }
    let mut days: Vec<u32> = (0..n)
        .map(|i| (first as f64 + (last - first) as f64 * i as f64 / (n - 1) as f64).round() as u32)
        .collect();
    days.dedup();
    days
}
