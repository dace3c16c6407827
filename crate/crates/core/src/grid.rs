//! Uniform one-dimensional grids and the composite trapezoid rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid of `n` nodes spanning `[min, max]` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

/// Builds a state grid. The count must be even and at least 16 so that the
/// spectral transform to position space is exact on the grid.
pub fn make_grid(p_min: f64, p_max: f64, n: usize) -> Result<GridSpec> {
    if !(p_min.is_finite() && p_max.is_finite()) || p_max <= p_min {
        return Err(Error::InvalidRange { min: p_min, max: p_max });
    }
    if n < 16 || !n.is_multiple_of(2) {
        return Err(Error::InvalidCount(n));
    }
    Ok(GridSpec { min: p_min, max: p_max, n })
}

impl GridSpec {
    /// Grid produced by an operation (sum grids, histogram centers). Only the
    /// range and `n >= 2` are checked.
    pub(crate) fn derived(min: f64, max: f64, n: usize) -> GridSpec {
        debug_assert!(max > min && n >= 2);
        GridSpec { min, max, n }
    }

    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.n - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.max
        } else {
            self.min + i as f64 * self.spacing()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }

    /// Trapezoid weight of node `i`, spacing included.
    pub fn weight(&self, i: usize) -> f64 {
        let h = self.spacing();
        if i == 0 || i + 1 == self.n {
            0.5 * h
        } else {
            h
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.weight(i)).collect()
    }

    /// Inclusive range test with a rounding allowance of 1e-9 cells.
    pub fn contains(&self, x: f64) -> bool {
        let tol = 1e-9 * self.spacing();
        x >= self.min - tol && x <= self.max + tol
    }

    /// Cell index and fractional offset for linear interpolation at `x`, or
    /// `None` outside the grid.
    pub fn locate(&self, x: f64) -> Option<(usize, f64)> {
        if !self.contains(x) {
            return None;
        }
        let s = ((x - self.min) / self.spacing()).max(0.0);
        let i = (s.floor() as usize).min(self.n - 2);
        Some((i, (s - i as f64).clamp(0.0, 1.0)))
    }

    /// Index of the node nearest to `x` (clamped to the grid).
    pub fn nearest(&self, x: f64) -> usize {
        let s = ((x - self.min) / self.spacing()).round();
        s.clamp(0.0, (self.n - 1) as f64) as usize
    }

    pub(crate) fn same_spacing(&self, other: &GridSpec) -> bool {
        let (a, b) = (self.spacing(), other.spacing());
        (a - b).abs() <= 1e-12 * a.max(b)
    }
}

/// Composite trapezoid integral of nodal values.
pub fn trapezoid(grid: &GridSpec, values: &[f64]) -> f64 {
    debug_assert_eq!(values.len(), grid.n);
    values.iter().enumerate().map(|(i, v)| grid.weight(i) * v).sum()
}

/// Piecewise-linear interpolation of nodal values; zero outside the grid.
pub fn interpolate(grid: &GridSpec, values: &[f64], x: f64) -> f64 {
    match grid.locate(x) {
        Some((i, t)) => (1.0 - t) * values[i] + t * values[i + 1],
        None => 0.0,
    }
}

/// Exact integral of the piecewise-linear interpolant over `[a, b]`, i.e. the
/// trapezoid rule with linearly interpolated endpoints. Both endpoints must
/// lie inside the grid.
pub fn integrate_between(grid: &GridSpec, values: &[f64], a: f64, b: f64) -> f64 {
    debug_assert!(a <= b);
    let (a, b) = (a.max(grid.min), b.min(grid.max));
    let (ia, ta) = grid.locate(a).expect("lower limit inside grid");
    let (ib, tb) = grid.locate(b).expect("upper limit inside grid");
    let h = grid.spacing();
    let fa = (1.0 - ta) * values[ia] + ta * values[ia + 1];
    let fb = (1.0 - tb) * values[ib] + tb * values[ib + 1];
    if ia == ib {
        return 0.5 * (fa + fb) * (tb - ta) * h;
    }
    // partial cell after a, full cells, partial cell before b
    let mut total = 0.5 * (fa + values[ia + 1]) * (1.0 - ta) * h;
    for k in ia + 1..ib {
        total += 0.5 * (values[k] + values[k + 1]) * h;
    }
    total + 0.5 * (values[ib] + fb) * tb * h
}
