//! Multifractional Brownian motion: covariance kernel, marginal law and
//! exact path sampling by Cholesky factorisation of the covariance over a
//! time grid.
//!
//! The kernel is
//!
//! ```text
//! R(t, s) = D(h(t), h(s)) [ t^{h(t)+h(s)} + s^{h(t)+h(s)} - |t - s|^{h(t)+h(s)} ]
//! D(a, b) = sqrt(G(2a+1) G(2b+1) sin(pi a) sin(pi b)) / (2 G(a+b+1) sin(pi (a+b)/2))
//! ```
//!
//! so that `R(t, t) = t^{2h(t)}` and `var W(1) = 1`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hurst::HurstFunction;

/// Paths per RNG substream. Fixed so that results do not depend on the
/// number of worker threads.
pub const PATHS_PER_BLOCK: usize = 4096;

const JITTER_LADDER: [f64; 5] = [1e-12, 1e-11, 1e-10, 1e-9, 1e-8];

/// Normalisation factor `D(h1, h2)`; equals 1/2 on the diagonal.
pub fn d_factor(h1: f64, h2: f64) -> Result<f64> {
    for h in [h1, h2] {
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::domain(format!("Hurst value {h} outside (0, 1)")));
        }
    }
    if h1 == h2 {
        return Ok(0.5);
    }
    let g = libm::tgamma;
    let num = g(2.0 * h1 + 1.0) * g(2.0 * h2 + 1.0) * (PI * h1).sin() * (PI * h2).sin();
    let den = 2.0 * g(h1 + h2 + 1.0) * (0.5 * PI * (h1 + h2)).sin();
    Ok(num.sqrt() / den)
}

/// Deterministic-seed RNG for substream `block`.
pub(crate) fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

#[derive(Debug, Clone)]
pub struct CovarianceKernel {
    hurst: HurstFunction,
}

impl CovarianceKernel {
    pub fn new(hurst: HurstFunction) -> Self {
        Self { hurst }
    }

    pub fn hurst(&self) -> &HurstFunction {
        &self.hurst
    }

    /// `E[W(t) W(s)]`.
    pub fn covariance(&self, t: f64, s: f64) -> Result<f64> {
        let (t, s) = if t <= s { (t, s) } else { (s, t) };
        let ht = self.hurst.evaluate(t)?;
        let hs = self.hurst.evaluate(s)?;
        if t == 0.0 || s == 0.0 {
            return Ok(0.0);
        }
        let a = ht + hs;
        let bracket = t.powf(a) + s.powf(a) - (t - s).abs().powf(a);
        Ok(d_factor(ht, hs)? * bracket)
    }

    /// `t^{h(t)}`.
    pub fn marginal_std(&self, t: f64) -> Result<f64> {
        let h = self.hurst.evaluate(t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        Ok(t.powf(h))
    }

    pub fn covariance_matrix(&self, times: &[f64]) -> Result<DMatrix<f64>> {
        let n = times.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let c = self.covariance(times[i], times[j])?;
                m[(i, j)] = c;
                m[(j, i)] = c;
            }
        }
        Ok(m)
    }

    /// Exact Gaussian sampling of `(W(t_1), ..., W(t_n))`.
    pub fn sample_paths(&self, grid: &PathGrid) -> Result<PathMatrix> {
        let sampler = MbmSampler::new(self, grid.times())?;
        Ok(sampler.sample(grid.n_paths(), grid.seed()))
    }
}

/// Strictly increasing positive sampling times plus path count and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGrid {
    times: Vec<f64>,
    n_paths: usize,
    seed: u64,
}

impl PathGrid {
    pub fn new(times: Vec<f64>, n_paths: usize, seed: u64) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::domain("path grid needs at least one time"));
        }
        if !(times[0] > 0.0) || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::domain("path grid times must be finite and > 0"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("path grid times must be strictly increasing"));
        }
        Ok(Self {
            times,
            n_paths,
            seed,
        })
    }

    /// `n` equally spaced times `T/n, 2T/n, ..., T`.
    pub fn uniform(horizon: f64, n: usize, n_paths: usize, seed: u64) -> Result<Self> {
        if n == 0 || !(horizon > 0.0) {
            return Err(Error::domain("uniform grid needs n >= 1 and horizon > 0"));
        }
        let times = (1..=n).map(|k| horizon * k as f64 / n as f64).collect();
        Self::new(times, n_paths, seed)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Row-major `n_paths x n_times` matrix of sampled values.
#[derive(Debug, Clone, PartialEq)]
pub struct PathMatrix {
    times: Vec<f64>,
    values: Vec<f64>,
    n_paths: usize,
}

impl PathMatrix {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn path(&self, i: usize) -> &[f64] {
        let n = self.times.len();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn paths(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.times.len().max(1))
    }
}

/// Cholesky factor of the mBm covariance on a fixed grid, reusable across
/// many draws.
#[derive(Debug, Clone)]
pub struct MbmSampler {
    times: Vec<f64>,
    // lower factor stored column by column: column j holds rows j..n
    columns: Vec<f64>,
    offsets: Vec<usize>,
    jitter: f64,
}

impl MbmSampler {
    pub fn new(kernel: &CovarianceKernel, times: &[f64]) -> Result<Self> {
        let cov = kernel.covariance_matrix(times)?;
        Self::from_covariance(times, cov)
    }

    fn from_covariance(times: &[f64], cov: DMatrix<f64>) -> Result<Self> {
        let n = times.len();
        let mut jitter = 0.0;
        let mut factor = cov.clone().cholesky();
        for &eps in &JITTER_LADDER {
            if factor.is_some() {
                break;
            }
            jitter = eps;
            factor = (&cov + DMatrix::identity(n, n) * eps).cholesky();
        }
        let Some(factor) = factor else {
            let min_eigenvalue = SymmetricEigen::new(cov)
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            return Err(Error::IllConditioned {
                grid: times.to_vec(),
                min_eigenvalue,
            });
        };
        let l = factor.l();
        let mut columns = Vec::with_capacity(n * (n + 1) / 2);
        let mut offsets = Vec::with_capacity(n);
        for j in 0..n {
            offsets.push(columns.len());
            for i in j..n {
                columns.push(l[(i, j)]);
            }
        }
        Ok(Self {
            times: times.to_vec(),
            columns,
            offsets,
            jitter,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Diagonal jitter that was needed for the factorisation (0 if none).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Writes `L z` into `out`, where `z` is a standard normal vector.
    pub fn correlate(&self, z: &[f64], out: &mut [f64]) {
        let n = self.times.len();
        out.fill(0.0);
        for j in 0..n {
            let col = &self.columns[self.offsets[j]..self.offsets[j] + n - j];
            let zj = z[j];
            for (o, c) in out[j..].iter_mut().zip(col) {
                *o += zj * c;
            }
        }
    }

    /// Draws one path into `out` using `z` as scratch space.
    pub fn draw<R: rand::Rng>(&self, rng: &mut R, z: &mut [f64], out: &mut [f64]) {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(rng);
        }
        self.correlate(z, out);
    }

    /// `n_paths` independent paths. Path `i` belongs to RNG substream
    /// `i / PATHS_PER_BLOCK`, so output is independent of thread count.
    pub fn sample(&self, n_paths: usize, seed: u64) -> PathMatrix {
        let n = self.times.len();
        let mut values = vec![0.0; n_paths * n];
        if n > 0 {
            values
                .par_chunks_mut(PATHS_PER_BLOCK * n)
                .enumerate()
                .for_each(|(block, chunk)| {
                    let mut rng = block_rng(seed, block as u64);
                    let mut z = vec![0.0; n];
                    for out in chunk.chunks_exact_mut(n) {
                        self.draw(&mut rng, &mut z, out);
                    }
                });
        }
        PathMatrix {
            times: self.times.clone(),
            values,
            n_paths,
        }
    }
}
