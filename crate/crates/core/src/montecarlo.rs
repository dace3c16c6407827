//! Monte Carlo path: ensembles drawn from the momentum density, conditioning
//! by post-selection on a total-momentum window.
//!
//! Samples are generated in fixed chunks of [`CHUNK_SIZE`]; chunk `k` draws
//! from ChaCha20 seeded with the user seed on stream `k`, so the output does
//! not depend on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditional::{Method, PredictionResult};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::measurement::MeasurementWindow;
use crate::observable::Observable1;
use crate::state::{Density2, GaussianParams};

pub const CHUNK_SIZE: usize = 1 << 16;
/// Fewest accepted samples for which a mean and standard error are reported.
pub const MIN_ACCEPTED: usize = 100;

/// What to sample from.
#[derive(Debug, Clone, Copy)]
pub enum SamplingSource<'a> {
    /// Exact bivariate construction from the parameters.
    Gaussian(GaussianParams),
    /// Inverse-transform sampling of the bilinear interpolant of a grid density.
    Grid(&'a Density2),
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv(hash: u64, bytes: &[u8]) -> u64 {
    bytes.iter().fold(hash, |h, b| (h ^ *b as u64).wrapping_mul(FNV_PRIME))
}

impl SamplingSource<'_> {
    /// FNV-1a hash of the source description.
    pub fn descriptor_hash(&self) -> u64 {
        match self {
            SamplingSource::Gaussian(g) => [g.mu1, g.mu2, g.sigma, g.c]
                .iter()
                .fold(fnv(FNV_OFFSET, b"gaussian"), |h, v| fnv(h, &v.to_le_bytes())),
            SamplingSource::Grid(rho) => {
                let mut h = fnv(FNV_OFFSET, b"grid");
                for g in [&rho.grid1, &rho.grid2] {
                    h = fnv(h, &g.min.to_le_bytes());
                    h = fnv(h, &g.max.to_le_bytes());
                    h = fnv(h, &(g.n as u64).to_le_bytes());
                }
                rho.val.iter().fold(h, |h, v| fnv(h, &v.to_le_bytes()))
            }
        }
    }
}

/// Momentum pairs `(p1, p2)` drawn from one state.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub seed: u64,
    pub points: Vec<[f64; 2]>,
    /// Hash of the source descriptor.
    pub source: u64,
}

impl SampleSet {
    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn totals(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p[0] + p[1])
    }
}

/// Inverse-transform sampler for the bilinear interpolant of a grid density.
struct GridSampler<'a> {
    rho: &'a Density2,
    /// Cumulative mass of the piecewise-linear `p1` marginal at each node.
    cdf1: Vec<f64>,
    /// Row masses `∫ ρ(p1_i, p2) dp2`.
    row_mass: Vec<f64>,
    /// Per-row cumulative trapezoid along `p2`.
    row_cdf: Vec<Vec<f64>>,
}

/// Solves `a s + (b - a) s² / 2 = u` for `s ∈ [0, 1]`: the inverse CDF of the
/// linear density `a (1 - s) + b s` on one cell.
fn invert_linear_cell(a: f64, b: f64, u: f64) -> f64 {
    let disc = (a * a + 2.0 * (b - a) * u).max(0.0);
    let denom = a + disc.sqrt();
    if denom <= 0.0 {
        return 0.0;
    }
    (2.0 * u / denom).clamp(0.0, 1.0)
}

fn cumulative(grid: &GridSpec, values: impl Iterator<Item = f64>) -> Vec<f64> {
    let h = grid.spacing();
    let mut out = Vec::with_capacity(grid.n);
    let mut prev: Option<f64> = None;
    let mut acc = 0.0;
    for v in values {
        if let Some(p) = prev {
            acc += 0.5 * (p + v) * h;
        }
        out.push(acc);
        prev = Some(v);
    }
    out
}

/// Largest index `j <= n - 2` with `f(j) <= target`, for nondecreasing `f`.
fn search_cell(n: usize, target: f64, f: impl Fn(usize) -> f64) -> usize {
    let (mut lo, mut hi) = (0usize, n - 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if f(mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

impl<'a> GridSampler<'a> {
    fn new(rho: &'a Density2) -> Self {
        let row_cdf: Vec<Vec<f64>> = rho.val.outer_iter().map(|row| cumulative(&rho.grid2, row.iter().cloned())).collect();
        let row_mass: Vec<f64> = row_cdf.iter().map(|c| *c.last().unwrap()).collect();
        let cdf1 = cumulative(&rho.grid1, row_mass.iter().cloned());
        GridSampler { rho, cdf1, row_mass, row_cdf }
    }

    fn draw(&self, rng: &mut ChaCha20Rng) -> [f64; 2] {
        let (g1, g2) = (&self.rho.grid1, &self.rho.grid2);
        let (h1, h2) = (g1.spacing(), g2.spacing());

        let target = rng.random::<f64>() * self.cdf1.last().unwrap();
        let i = search_cell(g1.n, target, |k| self.cdf1[k]);
        let t = invert_linear_cell(self.row_mass[i], self.row_mass[i + 1], (target - self.cdf1[i]) / h1);
        let p1 = g1.point(i) + t * h1;

        let mix = |k: usize| (1.0 - t) * self.row_cdf[i][k] + t * self.row_cdf[i + 1][k];
        let total = (1.0 - t) * self.row_mass[i] + t * self.row_mass[i + 1];
        let target = rng.random::<f64>() * total;
        let j = search_cell(g2.n, target, mix);
        let v = &self.rho.val;
        let a = (1.0 - t) * v[[i, j]] + t * v[[i + 1, j]];
        let b = (1.0 - t) * v[[i, j + 1]] + t * v[[i + 1, j + 1]];
        let s = invert_linear_cell(a, b, (target - mix(j)) / h2);
        [p1, g2.point(j) + s * h2]
    }
}

fn draw_gaussian(g: &GaussianParams, rng: &mut ChaCha20Rng) -> [f64; 2] {
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    let p1 = g.mu1 + g.sigma * z1;
    let p2 = g.mu2 + g.sigma * (g.c * z1 + (1.0 - g.c * g.c).sqrt() * z2);
    [p1, p2]
}

/// Draws `n` momentum pairs. Identical `(source, n, seed)` give bitwise
/// identical samples regardless of thread count.
pub fn sample(source: SamplingSource<'_>, n: usize, seed: u64) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::InvalidParams("sample count must be at least 1".into()));
    }
    if let SamplingSource::Gaussian(g) = &source {
        g.validate()?;
    }
    let sampler = match source {
        SamplingSource::Grid(rho) => Some(GridSampler::new(rho)),
        SamplingSource::Gaussian(_) => None,
    };
    let chunks = n.div_ceil(CHUNK_SIZE);
    let parts: Vec<Vec<[f64; 2]>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let len = CHUNK_SIZE.min(n - k * CHUNK_SIZE);
            (0..len)
                .map(|_| match (&source, &sampler) {
                    (SamplingSource::Gaussian(g), _) => draw_gaussian(g, &mut rng),
                    (SamplingSource::Grid(_), Some(s)) => s.draw(&mut rng),
                    (SamplingSource::Grid(_), None) => unreachable!(),
                })
                .collect()
        })
        .collect();
    Ok(SampleSet { seed, points: parts.concat(), source: source.descriptor_hash() })
}

/// Post-selected sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_accepted: usize,
    pub window: MeasurementWindow,
}

impl EmpiricalEstimate {
    pub fn to_prediction(&self) -> PredictionResult {
        PredictionResult {
            value: self.mean,
            conditioning_p: self.window.center,
            method: Method::MonteCarlo,
            std_error: Some(self.std_error),
        }
    }
}

/// Mean of `g(p1)` over the samples whose total momentum lies in the open
/// window.
pub fn empirical_conditional(samples: &SampleSet, w: &MeasurementWindow, g: &Observable1) -> Result<EmpiricalEstimate> {
    let accepted: Vec<f64> = samples
        .points
        .iter()
        .filter(|p| (p[0] + p[1] - w.center).abs() < w.half_width)
        .map(|p| g.eval(p[0]))
        .collect();
    let n = accepted.len();
    if n < MIN_ACCEPTED {
        return Err(Error::TooFewAccepted { accepted: n, required: MIN_ACCEPTED });
    }
    let mean = accepted.iter().sum::<f64>() / n as f64;
    let var = accepted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(EmpiricalEstimate { mean, std_error: (var / n as f64).sqrt(), n_accepted: n, window: *w })
}

/// Normalized histogram of the total momentum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub bin_width: f64,
    pub density: Vec<f64>,
}

impl Histogram {
    pub fn mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.bin_width
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.density.len()).map(|k| self.lo + (k as f64 + 0.5) * self.bin_width).collect()
    }
}

pub fn empirical_total_density(samples: &SampleSet, bins: usize) -> Result<Histogram> {
    if bins < 10 {
        return Err(Error::InvalidParams(format!("need at least 10 bins, got {bins}")));
    }
    let (mut lo, mut hi) = samples.totals().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| (a.min(s), b.max(s)));
    if hi <= lo {
        lo -= 0.5;
        hi += 0.5;
    }
    let bin_width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for s in samples.totals() {
        let k = (((s - lo) / bin_width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let scale = 1.0 / (samples.n() as f64 * bin_width);
    Ok(Histogram { lo, bin_width, density: counts.into_iter().map(|c| c as f64 * scale).collect() })
}

/// Sample mean and variance of the total momentum, with the standard error of
/// the variance estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TotalMoments {
    pub mean: f64,
    pub variance: f64,
    pub variance_se: f64,
}

pub fn total_momentum_moments(samples: &SampleSet) -> TotalMoments {
    let n = samples.n() as f64;
    let mean = samples.totals().sum::<f64>() / n;
    let m2 = samples.totals().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    let m4 = samples.totals().map(|s| (s - mean).powi(4)).sum::<f64>() / n;
    TotalMoments { mean, variance: m2 * n / (n - 1.0).max(1.0), variance_se: ((m4 - m2 * m2).max(0.0) / n).sqrt() }
}
