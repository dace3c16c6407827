//! Two-particle momentum-space states on rectangular grids, their densities,
//! and the expectation / variance / mean-square-error primitives.

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::grid::{interpolate, make_grid, trapezoid, GridSpec};
use crate::observable::Observable2;

/// Half-width of the default grid in units of sigma.
pub const DEFAULT_HALF_WIDTH_SIGMAS: f64 = 8.0;
/// Default node count per axis.
pub const DEFAULT_POINTS: usize = 512;
/// Largest probability mass a grid may leave uncovered.
pub const MAX_MISSING_MASS: f64 = 1e-6;

/// Correlated Gaussian two-particle state: both momenta have standard
/// deviation `sigma`, means `mu1`, `mu2`, and correlation `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub mu1: f64,
    pub mu2: f64,
    pub sigma: f64,
    pub c: f64,
}

impl GaussianParams {
    pub fn new(mu1: f64, mu2: f64, sigma: f64, c: f64) -> Result<Self> {
        let params = GaussianParams { mu1, mu2, sigma, c };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu1.is_finite() && self.mu2.is_finite()) {
            return Err(Error::InvalidParams("means must be finite".into()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParams(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.c > -1.0 && self.c < 1.0) {
            return Err(Error::InvalidParams(format!("correlation must lie in (-1, 1), got {}", self.c)));
        }
        Ok(())
    }

    /// Mean total momentum `mu1 + mu2`.
    pub fn mu(&self) -> f64 {
        self.mu1 + self.mu2
    }

    /// Joint probability density of `(p1, p2)`.
    pub fn density(&self, p1: f64, p2: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        let one_m_c2 = 1.0 - self.c * self.c;
        let x1 = p1 - self.mu1;
        let x2 = p2 - self.mu2;
        let q = (x1 * x1 - 2.0 * self.c * x1 * x2 + x2 * x2) / (s2 * one_m_c2);
        (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * s2 * one_m_c2.sqrt())
    }

    /// Grids covering `mu_i ± 8 sigma` with 512 nodes each.
    pub fn default_grids(&self) -> (GridSpec, GridSpec) {
        self.grids_with(DEFAULT_HALF_WIDTH_SIGMAS, DEFAULT_POINTS)
    }

    pub fn grids_with(&self, half_width_sigmas: f64, n: usize) -> (GridSpec, GridSpec) {
        let h = half_width_sigmas * self.sigma;
        let g1 = make_grid(self.mu1 - h, self.mu1 + h, n).expect("valid default grid");
        let g2 = make_grid(self.mu2 - h, self.mu2 + h, n).expect("valid default grid");
        (g1, g2)
    }

    /// Upper bound on the probability mass falling outside `grid1 × grid2`.
    pub fn missing_mass(&self, grid1: &GridSpec, grid2: &GridSpec) -> f64 {
        let tail = |mu: f64, g: &GridSpec| {
            let z = std::f64::consts::SQRT_2 * self.sigma;
            0.5 * erfc((mu - g.min) / z) + 0.5 * erfc((g.max - mu) / z)
        };
        tail(self.mu1, grid1) + tail(self.mu2, grid2)
    }
}

/// Complex amplitudes `Ψ(p1_i, p2_j)` on a rectangular momentum grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction2 {
    pub grid1: GridSpec,
    pub grid2: GridSpec,
    pub amp: Array2<Complex64>,
}

/// Double trapezoid integral of `f(i, j)`, rows summed in parallel and
/// reduced in fixed order.
pub(crate) fn integrate_2d<F>(grid1: &GridSpec, grid2: &GridSpec, f: F) -> f64
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let w2 = grid2.weights();
    let rows: Vec<f64> = (0..grid1.n)
        .into_par_iter()
        .map(|i| {
            let s: f64 = w2.iter().enumerate().map(|(j, w)| w * f(i, j)).sum();
            grid1.weight(i) * s
        })
        .collect();
    rows.iter().sum()
}

fn check_shape(grid1: &GridSpec, grid2: &GridSpec, shape: &[usize]) -> Result<()> {
    if shape != [grid1.n, grid2.n] {
        return Err(Error::IncompatibleGrids(format!(
            "array shape {shape:?} does not match grids ({}, {})",
            grid1.n, grid2.n
        )));
    }
    Ok(())
}

impl WaveFunction2 {
    /// Wraps amplitudes without normalizing them.
    pub fn from_amplitudes(grid1: GridSpec, grid2: GridSpec, amp: Array2<Complex64>) -> Result<Self> {
        check_shape(&grid1, &grid2, amp.shape())?;
        if amp.iter().any(|a| !(a.re.is_finite() && a.im.is_finite())) {
            return Err(Error::InvalidParams("amplitudes must be finite".into()));
        }
        Ok(WaveFunction2 { grid1, grid2, amp })
    }

    pub fn from_fn<F>(grid1: GridSpec, grid2: GridSpec, f: F) -> Self
    where
        F: Fn(f64, f64) -> Complex64,
    {
        let p1 = grid1.points();
        let p2 = grid2.points();
        let amp = Array2::from_shape_fn((grid1.n, grid2.n), |(i, j)| f(p1[i], p2[j]));
        WaveFunction2 { grid1, grid2, amp }
    }

    /// Squared L2 norm under the double trapezoid rule.
    pub fn norm_sq(&self) -> f64 {
        integrate_2d(&self.grid1, &self.grid2, |i, j| self.amp[[i, j]].norm_sqr())
    }

    pub fn normalized(mut self) -> Result<Self> {
        let norm = self.norm_sq();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidParams("state has zero norm".into()));
        }
        let scale = 1.0 / norm.sqrt();
        self.amp.mapv_inplace(|a| a * scale);
        Ok(self)
    }
}

fn check_gaussian_coverage(params: &GaussianParams, grid1: &GridSpec, grid2: &GridSpec, weight: f64) -> Result<()> {
    let missing = weight * params.missing_mass(grid1, grid2);
    if missing > MAX_MISSING_MASS {
        return Err(Error::CoverageTooSmall { missing });
    }
    let reach = 6.0 * params.sigma;
    if grid1.min > params.mu1 - reach
        || grid1.max < params.mu1 + reach
        || grid2.min > params.mu2 - reach
        || grid2.max < params.mu2 + reach
    {
        log::warn!("grid covers less than mu ± 6 sigma; truncated mass {missing:.3e}");
    }
    Ok(())
}

/// The Gaussian state lifted to real, nonnegative amplitudes `√ρ` and
/// renormalized on the grid.
pub fn gaussian_wavefunction(params: GaussianParams, grid1: GridSpec, grid2: GridSpec) -> Result<WaveFunction2> {
    params.validate()?;
    check_gaussian_coverage(&params, &grid1, &grid2, 1.0)?;
    WaveFunction2::from_fn(grid1, grid2, |p1, p2| Complex64::new(params.density(p1, p2).sqrt(), 0.0)).normalized()
}

/// Real amplitudes `√ρ` of a weighted mixture of Gaussian densities.
pub fn mixture_wavefunction(components: &[(f64, GaussianParams)], grid1: GridSpec, grid2: GridSpec) -> Result<WaveFunction2> {
    if components.is_empty() {
        return Err(Error::InvalidParams("mixture needs at least one component".into()));
    }
    let total: f64 = components.iter().map(|(w, _)| *w).sum();
    for (w, params) in components {
        if !(*w > 0.0) {
            return Err(Error::InvalidParams("mixture weights must be positive".into()));
        }
        params.validate()?;
        check_gaussian_coverage(params, &grid1, &grid2, w / total)?;
    }
    WaveFunction2::from_fn(grid1, grid2, |p1, p2| {
        let rho: f64 = components.iter().map(|(w, g)| w / total * g.density(p1, p2)).sum();
        Complex64::new(rho.sqrt(), 0.0)
    })
    .normalized()
}

/// Joint momentum density `ρ(p1_i, p2_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Density2 {
    pub grid1: GridSpec,
    pub grid2: GridSpec,
    pub val: Array2<f64>,
}

impl Density2 {
    /// Validates nonnegativity and unit mass (within 1e-6).
    pub fn new(grid1: GridSpec, grid2: GridSpec, val: Array2<f64>) -> Result<Self> {
        check_shape(&grid1, &grid2, val.shape())?;
        if val.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParams("density values must be finite and nonnegative".into()));
        }
        let rho = Density2 { grid1, grid2, val };
        let mass = rho.mass();
        if (mass - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidParams(format!("density mass {mass} is not 1")));
        }
        Ok(rho)
    }

    /// Scales nonnegative values to unit mass.
    pub fn normalized_from(grid1: GridSpec, grid2: GridSpec, mut val: Array2<f64>) -> Result<Self> {
        check_shape(&grid1, &grid2, val.shape())?;
        let probe = Density2 { grid1, grid2, val: val.clone() };
        let mass = probe.mass();
        if !(mass > 0.0 && mass.is_finite()) || val.iter().any(|v| *v < 0.0) {
            return Err(Error::InvalidParams("density must be nonnegative with positive mass".into()));
        }
        val.mapv_inplace(|v| v / mass);
        Density2::new(grid1, grid2, val)
    }

    pub fn mass(&self) -> f64 {
        integrate_2d(&self.grid1, &self.grid2, |i, j| self.val[[i, j]])
    }

    /// Bilinear interpolation; zero outside the grid.
    pub fn value_at(&self, p1: f64, p2: f64) -> f64 {
        match (self.grid1.locate(p1), self.grid2.locate(p2)) {
            (Some((i, s)), Some((j, t))) => {
                let v = &self.val;
                (1.0 - s) * ((1.0 - t) * v[[i, j]] + t * v[[i, j + 1]])
                    + s * ((1.0 - t) * v[[i + 1, j]] + t * v[[i + 1, j + 1]])
            }
            _ => 0.0,
        }
    }
}

/// Probability density of a single momentum variable on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Density1 {
    pub grid: GridSpec,
    pub val: Vec<f64>,
}

impl Density1 {
    pub fn mass(&self) -> f64 {
        trapezoid(&self.grid, &self.val)
    }

    pub fn value_at(&self, p: f64) -> f64 {
        interpolate(&self.grid, &self.val, p)
    }

    pub fn max_value(&self) -> f64 {
        self.val.iter().cloned().fold(0.0, f64::max)
    }

    /// `(mean, variance)` by trapezoid quadrature.
    pub fn moments(&self) -> (f64, f64) {
        let pts = self.grid.points();
        let m0 = self.mass();
        let mean = pts.iter().zip(&self.val).enumerate().map(|(i, (p, v))| self.grid.weight(i) * p * v).sum::<f64>() / m0;
        let var = pts
            .iter()
            .zip(&self.val)
            .enumerate()
            .map(|(i, (p, v))| self.grid.weight(i) * (p - mean) * (p - mean) * v)
            .sum::<f64>()
            / m0;
        (mean, var)
    }
}

/// Born-rule density `|Ψ|²`.
pub fn density_of(psi: &WaveFunction2) -> Density2 {
    Density2 {
        grid1: psi.grid1,
        grid2: psi.grid2,
        val: psi.amp.mapv(|a| a.norm_sqr()),
    }
}

/// `E[f]` by double trapezoid quadrature.
pub fn expectation(rho: &Density2, f: &Observable2) -> f64 {
    let p1 = rho.grid1.points();
    let p2 = rho.grid2.points();
    integrate_2d(&rho.grid1, &rho.grid2, |i, j| f.eval(p1[i], p2[j]) * rho.val[[i, j]])
}

/// Mean square error `E[(f - m)²]` of predicting `f` by the number `m`.
pub fn mse_at(rho: &Density2, f: &Observable2, m: f64) -> f64 {
    let p1 = rho.grid1.points();
    let p2 = rho.grid2.points();
    integrate_2d(&rho.grid1, &rho.grid2, |i, j| {
        let d = f.eval(p1[i], p2[j]) - m;
        d * d * rho.val[[i, j]]
    })
}

/// Prediction error `E[f²] - E[f]²`, computed in centered form so it cannot go
/// negative.
pub fn variance(rho: &Density2, f: &Observable2) -> f64 {
    mse_at(rho, f, expectation(rho, f)).max(0.0)
}
