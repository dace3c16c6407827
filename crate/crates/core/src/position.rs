//! Coordinate representation and uncertainty bookkeeping.
//!
//! The transform is `Ψ(x1, x2) = (2π)⁻¹ ∬ e^{i(p1 x1 + p2 x2)} Ψ(p1, p2) dp1 dp2`
//! (ħ = 1), evaluated exactly on the momentum nodes. Each position axis is the
//! spectral dual of its momentum axis: `Δx = 2π / (n Δp)`, with nodes
//! `x_k = (k - n/2) Δx`. Writing `p_j = p_min + j Δp` gives
//! `e^{i p_j x_k} = e^{i p_min x_k} (-1)^j e^{2πi jk/n}`, so each axis is one
//! inverse FFT between two diagonal phase factors.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::measurement::{apply_window, check_resolution, MeasurementWindow, SumLattice};
use crate::observable::Observable2;
use crate::state::{density_of, variance, WaveFunction2};

/// Wave function in the coordinate representation.
#[derive(Debug, Clone)]
pub struct PositionState {
    pub xgrid1: GridSpec,
    pub xgrid2: GridSpec,
    /// Momentum grids the state was transformed from.
    pub pgrid1: GridSpec,
    pub pgrid2: GridSpec,
    pub amp: Array2<Complex64>,
}

/// Position grid dual to a momentum grid.
pub fn dual_grid(pgrid: &GridSpec) -> GridSpec {
    let n = pgrid.n;
    let dx = 2.0 * PI / (n as f64 * pgrid.spacing());
    let half = (n / 2) as f64;
    GridSpec::derived(-half * dx, (n as f64 - 1.0 - half) * dx, n)
}

struct AxisTransform {
    fft: Arc<dyn Fft<f64>>,
    /// `(-1)^j`, applied before the FFT.
    pre: Vec<f64>,
    /// `Δp / √(2π) · e^{i p_min x_k}`, applied after.
    post: Vec<Complex64>,
}

impl AxisTransform {
    fn new(planner: &mut FftPlanner<f64>, pgrid: &GridSpec, inverse: bool) -> Self {
        let n = pgrid.n;
        let xgrid = dual_grid(pgrid);
        let scale = pgrid.spacing() / (2.0 * PI).sqrt();
        let pre = (0..n).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let post = (0..n).map(|k| Complex64::from_polar(scale, pgrid.min * xgrid.point(k))).collect();
        let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
        AxisTransform { fft, pre, post }
    }

    fn to_position(&self, lane: &mut [Complex64]) {
        for (a, s) in lane.iter_mut().zip(&self.pre) {
            *a *= s;
        }
        self.fft.process(lane);
        for (a, s) in lane.iter_mut().zip(&self.post) {
            *a *= s;
        }
    }
}

/// Applies `op` to every lane running along `axis`: rows for 1, columns for 0.
fn map_lanes<F>(data: &mut Array2<Complex64>, axis: usize, op: F)
where
    F: Fn(&mut [Complex64]) + Sync,
{
    if axis == 0 {
        let mut t = data.t().as_standard_layout().into_owned();
        map_lanes(&mut t, 1, op);
        data.assign(&t.t());
        return;
    }
    data.axis_iter_mut(Axis(0)).into_par_iter().for_each(|mut row| {
        let mut buf = row.to_vec();
        op(&mut buf);
        for (dst, src) in row.iter_mut().zip(buf) {
            *dst = src;
        }
    });
}

pub fn to_position(psi: &WaveFunction2) -> Result<PositionState> {
    for g in [&psi.grid1, &psi.grid2] {
        if g.n % 2 != 0 {
            return Err(Error::OddGrid(g.n));
        }
    }
    let mut planner = FftPlanner::new();
    let t1 = AxisTransform::new(&mut planner, &psi.grid1, true);
    let t2 = AxisTransform::new(&mut planner, &psi.grid2, true);
    let mut amp = psi.amp.clone();
    map_lanes(&mut amp, 1, |lane| t2.to_position(lane));
    map_lanes(&mut amp, 0, |lane| t1.to_position(lane));
    Ok(PositionState {
        xgrid1: dual_grid(&psi.grid1),
        xgrid2: dual_grid(&psi.grid2),
        pgrid1: psi.grid1,
        pgrid2: psi.grid2,
        amp,
    })
}

impl PositionState {
    fn cell(&self) -> f64 {
        self.xgrid1.spacing() * self.xgrid2.spacing()
    }

    /// Squared norm; the position grid is periodic, so every node carries the
    /// full cell weight.
    pub fn norm_sq(&self) -> f64 {
        self.amp.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.cell()
    }

    /// `E[f(x1, x2)]` under the position density.
    pub fn expectation<F>(&self, f: F) -> f64
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        let x1 = self.xgrid1.points();
        let x2 = self.xgrid2.points();
        let rows: Vec<f64> = self
            .amp
            .axis_iter(Axis(0))
            .into_par_iter()
            .enumerate()
            .map(|(i, row)| row.iter().zip(&x2).map(|(a, y)| f(x1[i], *y) * a.norm_sqr()).sum())
            .collect();
        rows.iter().sum::<f64>() * self.cell() / self.norm_sq()
    }

    /// Standard deviation of `f(x1, x2)`.
    pub fn sd<F>(&self, f: F) -> f64
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        let mean = self.expectation(&f);
        self.expectation(|a, b| (f(a, b) - mean).powi(2)).max(0.0).sqrt()
    }

    /// `(-i ∂/∂x_axis) Ψ` by spectral differentiation on the position grid.
    pub fn momentum_derivative(&self, axis: usize) -> Array2<Complex64> {
        let pgrid = if axis == 0 { self.pgrid1 } else { self.pgrid2 };
        let xgrid = if axis == 0 { self.xgrid1 } else { self.xgrid2 };
        let n = pgrid.n;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        // strip the e^{i p_min x} carrier so FFT bin j is the momentum p_j
        let carrier: Vec<Complex64> = (0..n).map(|k| Complex64::from_polar(1.0, pgrid.min * xgrid.point(k))).collect();
        let momenta: Vec<f64> = pgrid.points();
        let mut out = self.amp.clone();
        map_lanes(&mut out, axis, |lane| {
            for (a, c) in lane.iter_mut().zip(&carrier) {
                *a *= c.conj();
            }
            forward.process(lane);
            for (j, a) in lane.iter_mut().enumerate() {
                *a *= momenta[j] / n as f64;
            }
            inverse.process(lane);
            for (a, c) in lane.iter_mut().zip(&carrier) {
                *a *= c;
            }
        });
        out
    }

    /// `(E[p], Var[p])` for one particle, computed entirely in position space
    /// from `⟨Ψ|-i∂|Ψ⟩` and `‖∂Ψ‖²`.
    pub fn momentum_moments(&self, axis: usize) -> (f64, f64) {
        let d = self.momentum_derivative(axis);
        let norm = self.amp.iter().map(|a| a.norm_sqr()).sum::<f64>();
        let mean = self.amp.iter().zip(d.iter()).map(|(a, b)| (a.conj() * b).re).sum::<f64>() / norm;
        let second = d.iter().map(|b| b.norm_sqr()).sum::<f64>() / norm;
        (mean, (second - mean * mean).max(0.0))
    }
}

/// Standard deviations and uncertainty products of a state (ħ = 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyReport {
    pub sd_p1: f64,
    pub sd_x1: f64,
    pub sd_p2: f64,
    pub sd_x2: f64,
    pub sd_ptotal: f64,
    pub sd_xcm: f64,
    /// `(sd_x1 sd_p1, sd_x2 sd_p2, sd_xcm sd_ptotal)`
    pub products: (f64, f64, f64),
    pub m1: f64,
    pub m2: f64,
}

/// Lower bound `ħ/2` for every conjugate pair.
pub const UNCERTAINTY_BOUND: f64 = 0.5;

impl UncertaintyReport {
    /// True when every product is at least `0.5 (1 - rel_tol)`.
    pub fn satisfies_bound(&self, rel_tol: f64) -> bool {
        let floor = UNCERTAINTY_BOUND * (1.0 - rel_tol);
        let (a, b, c) = self.products;
        a >= floor && b >= floor && c >= floor
    }
}

pub fn uncertainty_report(psi: &WaveFunction2, m1: f64, m2: f64) -> Result<UncertaintyReport> {
    if !(m1 > 0.0 && m2 > 0.0 && m1.is_finite() && m2.is_finite()) {
        return Err(Error::InvalidParams(format!("masses must be positive, got ({m1}, {m2})")));
    }
    let rho = density_of(psi);
    let sd_p1 = variance(&rho, &Observable2::p1()).sqrt();
    let sd_p2 = variance(&rho, &Observable2::p2()).sqrt();
    let sd_ptotal = variance(&rho, &Observable2::total()).sqrt();
    let pos = to_position(psi)?;
    let sd_x1 = pos.sd(|x1, _| x1);
    let sd_x2 = pos.sd(|_, x2| x2);
    let sd_xcm = pos.sd(|x1, x2| (m1 * x1 + m2 * x2) / (m1 + m2));
    Ok(UncertaintyReport {
        sd_p1,
        sd_x1,
        sd_p2,
        sd_x2,
        sd_ptotal,
        sd_xcm,
        products: (sd_x1 * sd_p1, sd_x2 * sd_p2, sd_xcm * sd_ptotal),
        m1,
        m2,
    })
}

/// One rung of the center-of-mass ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CmRow {
    /// Snapped half-width.
    pub eps: f64,
    pub sd_ptotal: f64,
    pub sd_xcm: f64,
    pub product: f64,
    pub norm_prob: f64,
}

/// Spreads of the total momentum and of the center of mass after measuring
/// the total momentum with each half-width in `eps_list`.
pub fn cm_variance_vs_epsilon(psi: &WaveFunction2, p: f64, eps_list: &[f64], m1: f64, m2: f64) -> Result<Vec<CmRow>> {
    if eps_list.is_empty() || eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParams("eps_list must be non-empty and strictly decreasing".into()));
    }
    let lattice = SumLattice::of(psi)?;
    for &eps in eps_list {
        check_resolution(&lattice, eps)?;
    }
    eps_list
        .par_iter()
        .map(|&eps| {
            let state = apply_window(psi, &MeasurementWindow::new(p, eps)?)?;
            let report = uncertainty_report(&state.psi, m1, m2)?;
            Ok(CmRow {
                eps: state.window.half_width,
                sd_ptotal: report.sd_ptotal,
                sd_xcm: report.sd_xcm,
                product: report.products.2,
                norm_prob: state.norm_prob,
            })
        })
        .collect()
}
