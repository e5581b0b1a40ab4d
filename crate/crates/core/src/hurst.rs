//! Time-deterministic Hurst exponent `h(t)` and the scalar functionals of
//! it used by the rest of the crate.
//!
//! * `time_change(t) = t^{2h(t)}`, the clock under which the log-price
//!   density becomes a heat kernel (times `sigma^2`).
//! * `drift_factor(t) = t^{2h(t)-1} [h'(t) t ln t + h(t)]`, the Ito
//!   correction coefficient. It satisfies `d/dt time_change = 2 drift_factor`.
//!
//! Times are in years.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the Hurst function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HurstShape {
    Constant {
        hurst: f64,
    },
    /// `h(t) = amplitude * cos(2 pi frequency t + phase) + level`.
    Sinusoidal {
        amplitude: f64,
        phase: f64,
        level: f64,
        frequency: f64,
    },
    /// Piecewise-linear through `(t_i, h_i)` knots, flat outside them.
    Tabulated {
        knots: Vec<(f64, f64)>,
    },
}

/// A Hurst function together with bounds `[lower, upper] ⊂ (0, 1)` that it
/// never leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HurstFunction {
    shape: HurstShape,
    lower: f64,
    upper: f64,
}

fn check_bounds(lower: f64, upper: f64) -> Result<()> {
    if !(lower > 0.0 && lower <= upper && upper < 1.0) {
        return Err(Error::domain(format!(
            "Hurst bounds must satisfy 0 < l <= m < 1, got [{lower}, {upper}]"
        )));
    }
    Ok(())
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::domain(format!(
            "time must be finite and >= 0, got {t}"
        )));
    }
    Ok(())
}

impl HurstFunction {
    /// Constant exponent; the bounds collapse to `[hurst, hurst]`.
    pub fn constant(hurst: f64) -> Result<Self> {
        check_bounds(hurst, hurst)?;
        Ok(Self {
            shape: HurstShape::Constant { hurst },
            lower: hurst,
            upper: hurst,
        })
    }

    /// Sinusoid with the tightest bounds `[level - |A|, level + |A|]`.
    pub fn sinusoidal(amplitude: f64, phase: f64, level: f64, frequency: f64) -> Result<Self> {
        let a = amplitude.abs();
        Self::sinusoidal_bounded(amplitude, phase, level, frequency, level - a, level + a)
    }

    pub fn sinusoidal_bounded(
        amplitude: f64,
        phase: f64,
        level: f64,
        frequency: f64,
        lower: f64,
        upper: f64,
    ) -> Result<Self> {
        check_bounds(lower, upper)?;
        if ![amplitude, phase, level, frequency]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::domain("sinusoid parameters must be finite"));
        }
        if level - amplitude.abs() < lower || level + amplitude.abs() > upper {
            return Err(Error::domain(format!(
                "sinusoid range [{}, {}] escapes bounds [{lower}, {upper}]",
                level - amplitude.abs(),
                level + amplitude.abs()
            )));
        }
        Ok(Self {
            shape: HurstShape::Sinusoidal {
                amplitude,
                phase,
                level,
                frequency,
            },
            lower,
            upper,
        })
    }

    /// Tabulated knots, sorted here by time. Bounds are the knot extremes.
    pub fn tabulated(mut knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::domain(
                "tabulated Hurst function needs at least two knots",
            ));
        }
        if knots
            .iter()
            .any(|(t, h)| !t.is_finite() || !h.is_finite() || *t < 0.0)
        {
            return Err(Error::domain("knots must be finite with t >= 0"));
        }
        knots.sort_by(|a, b| a.0.total_cmp(&b.0));
        if knots.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::domain("duplicate knot times"));
        }
        let lower = knots.iter().map(|k| k.1).fold(f64::INFINITY, f64::min);
        let upper = knots.iter().map(|k| k.1).fold(f64::NEG_INFINITY, f64::max);
        check_bounds(lower, upper)?;
        Ok(Self {
            shape: HurstShape::Tabulated { knots },
            lower,
            upper,
        })
    }

    pub fn shape(&self) -> &HurstShape {
        &self.shape
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    /// `h(t)`.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.value_unchecked(t))
    }

    fn value_unchecked(&self, t: f64) -> f64 {
        match &self.shape {
            HurstShape::Constant { hurst } => *hurst,
            HurstShape::Sinusoidal {
                amplitude,
                phase,
                level,
                frequency,
            } => amplitude * (2.0 * PI * frequency * t + phase).cos() + level,
            HurstShape::Tabulated { knots } => interpolate(knots, t),
        }
    }

    /// `h'(t)`. For tabulated functions `t` must lie strictly inside the
    /// knot range.
    pub fn derivative(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        match &self.shape {
            HurstShape::Tabulated { knots } => {
                let (first, last) = (knots[0].0, knots[knots.len() - 1].0);
                if t <= first || t >= last {
                    return Err(Error::domain(format!(
                        "derivative of tabulated Hurst function requested at t = {t}, outside ({first}, {last})"
                    )));
                }
                Ok(tabulated_slope(knots, t))
            }
            _ => Ok(self.slope_unchecked(t)),
        }
    }

    // Slope including the flat extrapolation region (zero there).
    fn slope_unchecked(&self, t: f64) -> f64 {
        match &self.shape {
            HurstShape::Constant { .. } => 0.0,
            HurstShape::Sinusoidal {
                amplitude,
                phase,
                frequency,
                ..
            } => {
                let w = 2.0 * PI * frequency;
                -w * amplitude * (w * t + phase).sin()
            }
            HurstShape::Tabulated { knots } => {
                let (first, last) = (knots[0].0, knots[knots.len() - 1].0);
                if t < first || t > last {
                    0.0
                } else if t == first || t == last {
                    // average of the flat side and the adjacent segment
                    let (a, b) = if t == first {
                        (knots[0], knots[1])
                    } else {
                        (knots[knots.len() - 2], knots[knots.len() - 1])
                    };
                    0.5 * (b.1 - a.1) / (b.0 - a.0)
                } else {
                    tabulated_slope(knots, t)
                }
            }
        }
    }

    /// `t^{2h(t)}`; zero at `t = 0`.
    pub fn time_change(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        Ok(t.powf(2.0 * self.value_unchecked(t)))
    }

    /// `theta(t) = t^{2h(t)-1} [h'(t) t ln t + h(t)]`.
    ///
    /// At `t = 0` the `t ln t` term is taken at its limit 0: the result is 0
    /// for `h(0) > 1/2`, `h(0)` for `h(0) = 1/2`, and a [`Error::Singular`]
    /// for `h(0) < 1/2`. Tabulated functions use slope 0 in the flat
    /// extrapolation region.
    pub fn drift_factor(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        let h = self.value_unchecked(t);
        if t == 0.0 {
            return if h > 0.5 {
                Ok(0.0)
            } else if h == 0.5 {
                Ok(h)
            } else {
                Err(Error::Singular(format!(
                    "drift factor diverges at t = 0 with h(0) = {h} < 1/2"
                )))
            };
        }
        let slope = self.slope_unchecked(t);
        Ok(t.powf(2.0 * h - 1.0) * (slope * t * t.ln() + h))
    }
}

fn segment_index(knots: &[(f64, f64)], t: f64) -> usize {
    // index i with knots[i].0 <= t < knots[i + 1].0
    knots
        .partition_point(|k| k.0 <= t)
        .saturating_sub(1)
        .min(knots.len() - 2)
}

fn interpolate(knots: &[(f64, f64)], t: f64) -> f64 {
    let (first, last) = (knots[0], knots[knots.len() - 1]);
    if t <= first.0 {
        return first.1;
    }
    if t >= last.0 {
        return last.1;
    }
    let i = segment_index(knots, t);
    let (a, b) = (knots[i], knots[i + 1]);
    let w = (t - a.0) / (b.0 - a.0);
    a.1 + w * (b.1 - a.1)
}

// Caller guarantees first < t < last.
fn tabulated_slope(knots: &[(f64, f64)], t: f64) -> f64 {
    let i = segment_index(knots, t);
    if t == knots[i].0 && i > 0 {
        let (a, b) = (knots[i - 1], knots[i + 1]);
        (b.1 - a.1) / (b.0 - a.0)
    } else {
        let (a, b) = (knots[i], knots[i + 1]);
        (b.1 - a.1) / (b.0 - a.0)
    }
}
