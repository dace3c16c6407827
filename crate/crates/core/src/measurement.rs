//! Projection measurements of the total momentum.
//!
//! A window `(p - ε, p + ε)` is realized on the lattice of reachable sums
//! `s_k = min1 + min2 + k Δ`, which requires both momentum grids to share the
//! spacing `Δ`. The center snaps to the nearest sum node; the half-width is
//! kept as given. Windowed integrals over the total momentum integrate the
//! piecewise-linear interpolant across sum lines exactly, so a line at
//! distance `d` cells from the center carries the weight of its hat function
//! inside the window. The projector keeps exactly the lines with nonzero
//! weight, `|i + j - k_center| <= ceil(ε / Δ)`.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::conditional::{sum_grid, Conditioner};
use crate::convergence::fit_order;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::observable::Observable1;
use crate::state::{density_of, WaveFunction2};

/// Smallest half-width, in sum-grid cells, allowed in convergence studies.
pub const MIN_WINDOW_CELLS: usize = 4;
/// Smallest window probability accepted by [`apply_window`].
pub const MIN_WINDOW_PROBABILITY: f64 = 1e-12;

/// The interval `(center - half_width, center + half_width)` of total momenta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementWindow {
    pub center: f64,
    pub half_width: f64,
}

impl MeasurementWindow {
    pub fn new(center: f64, half_width: f64) -> Result<Self> {
        if !center.is_finite() || !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "window needs a finite center and positive half-width, got ({center}, {half_width})"
            )));
        }
        Ok(MeasurementWindow { center, half_width })
    }

    pub fn lo(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn hi(&self) -> f64 {
        self.center + self.half_width
    }
}

/// The lattice of total-momentum values reachable on a pair of equally spaced
/// grids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumLattice {
    pub grid: GridSpec,
    n1: usize,
    n2: usize,
}

/// A window expressed on the sum lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnappedWindow {
    pub window: MeasurementWindow,
    pub center_index: usize,
    /// Lines kept on each side of the center, `ceil(ε / Δ)`.
    pub reach: usize,
}

/// `∫_{-∞}^{x}` of the unit hat function.
fn hat_cdf(x: f64) -> f64 {
    if x <= -1.0 {
        0.0
    } else if x <= 0.0 {
        0.5 * (1.0 + x) * (1.0 + x)
    } else if x < 1.0 {
        1.0 - 0.5 * (1.0 - x) * (1.0 - x)
    } else {
        1.0
    }
}

impl SumLattice {
    pub fn new(grid1: &GridSpec, grid2: &GridSpec) -> Result<Self> {
        if !grid1.same_spacing(grid2) {
            return Err(Error::IncompatibleGrids(format!(
                "projection windows need equal spacings, got {} and {}",
                grid1.spacing(),
                grid2.spacing()
            )));
        }
        Ok(SumLattice { grid: sum_grid(grid1, grid2), n1: grid1.n, n2: grid2.n })
    }

    pub fn of(psi: &WaveFunction2) -> Result<Self> {
        SumLattice::new(&psi.grid1, &psi.grid2)
    }

    pub fn spacing(&self) -> f64 {
        self.grid.spacing()
    }

    /// Half-width in sum-grid cells, rounded to the nearest whole cell.
    pub fn cells_for(&self, half_width: f64) -> usize {
        (half_width / self.spacing()).round() as usize
    }

    pub fn snap(&self, w: &MeasurementWindow) -> Result<SnappedWindow> {
        let g = &self.grid;
        if w.hi() < g.min || w.lo() > g.max {
            return Err(Error::WindowOutOfRange { lo: w.lo(), hi: w.hi(), min: g.min, max: g.max });
        }
        let center_index = g.nearest(w.center);
        let ratio = w.half_width / self.spacing();
        // a ratio within rounding of an integer keeps the outer line out
        let reach = if (ratio - ratio.round()).abs() < 1e-9 { ratio.round() } else { ratio.ceil() };
        Ok(SnappedWindow {
            window: MeasurementWindow { center: g.point(center_index), half_width: w.half_width },
            center_index,
            reach: (reach as usize).max(1),
        })
    }

    fn band(&self, snapped: &SnappedWindow) -> (usize, usize) {
        let lo = snapped.center_index.saturating_sub(snapped.reach);
        let hi = (snapped.center_index + snapped.reach).min(self.grid.n - 1);
        (lo, hi)
    }

    /// Integral over the window of the hat function centered on line `k`,
    /// with the window clipped to the sum range.
    fn line_weight(&self, k: usize, snapped: &SnappedWindow) -> f64 {
        let h = self.spacing();
        let last = (self.grid.n - 1) as f64;
        let c = snapped.center_index as f64;
        let r = snapped.window.half_width / h;
        let lo = (c - r).max(0.0);
        let hi = (c + r).min(last);
        h * (hat_cdf(hi - k as f64) - hat_cdf(lo - k as f64)).max(0.0)
    }

    /// `Σ_k ω_k q(s_k) Σ_i w_i f(p1_i) |ψ(i, k - i)|²` over the band, with
    /// `w_i` the mean of the two trapezoid weights of node `(i, k - i)`.
    fn band_integral<F, Q>(&self, psi: &WaveFunction2, snapped: &SnappedWindow, f: F, q: Q) -> f64
    where
        F: Fn(f64) -> f64,
        Q: Fn(f64) -> f64,
    {
        let (lo, hi) = self.band(snapped);
        let p1 = psi.grid1.points();
        let w1 = psi.grid1.weights();
        let w2 = psi.grid2.weights();
        let mut total = 0.0;
        for k in lo..=hi {
            let i_min = k.saturating_sub(self.n2 - 1);
            let i_max = k.min(self.n1 - 1);
            let line: f64 =
                (i_min..=i_max).map(|i| 0.5 * (w1[i] + w2[k - i]) * f(p1[i]) * psi.amp[[i, k - i]].norm_sqr()).sum();
            total += self.line_weight(k, snapped) * q(self.grid.point(k)) * line;
        }
        total
    }
}

/// Amplitudes multiplied by the window indicator on grid nodes.
pub fn project(psi: &WaveFunction2, snapped: &SnappedWindow) -> Array2<Complex64> {
    let kc = snapped.center_index as i64;
    let m = snapped.reach as i64;
    let mut out = psi.amp.clone();
    for ((i, j), a) in out.indexed_iter_mut() {
        if ((i + j) as i64 - kc).abs() > m {
            *a = Complex64::new(0.0, 0.0);
        }
    }
    out
}

/// The renormalized state after the total momentum was found in the window.
#[derive(Debug, Clone)]
pub struct PostMeasurementState {
    pub psi: WaveFunction2,
    pub window: MeasurementWindow,
    /// Probability of the outcome, `tr(P ρ P)`, before renormalization.
    pub norm_prob: f64,
    pub snapped: SnappedWindow,
    lattice: SumLattice,
}

pub fn apply_window(psi: &WaveFunction2, w: &MeasurementWindow) -> Result<PostMeasurementState> {
    let lattice = SumLattice::of(psi)?;
    let snapped = lattice.snap(w)?;
    let projected = WaveFunction2 { grid1: psi.grid1, grid2: psi.grid2, amp: project(psi, &snapped) };
    let norm_prob = lattice.band_integral(&projected, &snapped, |_| 1.0, |_| 1.0);
    if !(norm_prob >= MIN_WINDOW_PROBABILITY) {
        return Err(Error::ZeroProbabilityWindow { prob: norm_prob });
    }
    Ok(PostMeasurementState {
        psi: projected.normalized()?,
        window: snapped.window,
        norm_prob,
        snapped,
        lattice,
    })
}

/// Applies the projector once and twice and compares the raw amplitudes bit
/// for bit.
pub fn projection_idempotence_check(psi: &WaveFunction2, w: &MeasurementWindow) -> Result<bool> {
    let snapped = SumLattice::of(psi)?.snap(w)?;
    let once = WaveFunction2 { grid1: psi.grid1, grid2: psi.grid2, amp: project(psi, &snapped) };
    let twice = project(&once, &snapped);
    Ok(once.amp.iter().zip(twice.iter()).all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()))
}

/// `tr(F(p1) ρ^ε)` as the quotient of windowed integrals.
pub fn post_expectation_p1(state: &PostMeasurementState, f: &Observable1) -> f64 {
    let num = state.lattice.band_integral(&state.psi, &state.snapped, |x| f.eval(x), |_| 1.0);
    let den = state.lattice.band_integral(&state.psi, &state.snapped, |_| 1.0, |_| 1.0);
    num / den
}

/// `tr(G(P) ρ^ε)` for a function of the total momentum.
pub fn post_expectation_total(state: &PostMeasurementState, g: &Observable1) -> f64 {
    let num = state.lattice.band_integral(&state.psi, &state.snapped, |_| 1.0, |s| g.eval(s));
    let den = state.lattice.band_integral(&state.psi, &state.snapped, |_| 1.0, |_| 1.0);
    num / den
}

/// Windowed expectations over a halving sequence of half-widths, compared
/// with their zero-width reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// Window center after snapping to the sum lattice.
    pub center: f64,
    /// Snapped half-widths, strictly decreasing.
    pub eps_values: Vec<f64>,
    pub observable_values: Vec<f64>,
    pub reference: f64,
    pub abs_errors: Vec<f64>,
    /// Log-log slope of error against half-width; `None` when every error is
    /// below the fitting floor.
    pub fitted_order: Option<f64>,
}

impl ConvergenceReport {
    pub fn is_degenerate(&self) -> bool {
        self.fitted_order.is_none()
    }

    pub fn final_error(&self) -> f64 {
        *self.abs_errors.last().expect("non-empty study")
    }
}

/// Half-widths `eps_start / 2^k`, `k = 0..=halvings`, checked against the
/// resolution floor.
pub fn halving_ladder(lattice: &SumLattice, eps_start: f64, halvings: usize) -> Result<Vec<f64>> {
    if halvings < 3 {
        return Err(Error::InvalidParams(format!("need at least 3 halvings, got {halvings}")));
    }
    if !(eps_start > 0.0 && eps_start.is_finite()) {
        return Err(Error::InvalidParams(format!("eps_start must be positive, got {eps_start}")));
    }
    let ladder: Vec<f64> = (0..=halvings).map(|k| eps_start / 2f64.powi(k as i32)).collect();
    check_resolution(lattice, *ladder.last().unwrap())?;
    Ok(ladder)
}

pub(crate) fn check_resolution(lattice: &SumLattice, eps: f64) -> Result<()> {
    let cells = lattice.cells_for(eps);
    if cells < MIN_WINDOW_CELLS {
        return Err(Error::WindowResolutionExceeded { eps, cells, required: MIN_WINDOW_CELLS });
    }
    Ok(())
}

fn run_study<E>(psi: &WaveFunction2, p: f64, eps_start: f64, halvings: usize, reference: impl FnOnce(f64) -> Result<f64>, eval: E) -> Result<ConvergenceReport>
where
    E: Fn(&PostMeasurementState) -> f64,
{
    let lattice = SumLattice::of(psi)?;
    let ladder = halving_ladder(&lattice, eps_start, halvings)?;
    let center = lattice.snap(&MeasurementWindow::new(p, ladder[0])?)?.window.center;
    let reference = reference(center)?;
    let mut eps_values = Vec::with_capacity(ladder.len());
    let mut observable_values = Vec::with_capacity(ladder.len());
    for eps in ladder {
        let state = apply_window(psi, &MeasurementWindow::new(center, eps)?)?;
        eps_values.push(state.window.half_width);
        observable_values.push(eval(&state));
    }
    let abs_errors: Vec<f64> = observable_values.iter().map(|v| (v - reference).abs()).collect();
    let fitted_order = fit_order(&eps_values, &abs_errors);
    Ok(ConvergenceReport { center, eps_values, observable_values, reference, abs_errors, fitted_order })
}

/// Post-measurement expectation of `F(p1)` as the window shrinks, against the
/// conditional expectation `E[F(p1) | P = center]` computed by quadrature.
pub fn epsilon_limit_study(psi: &WaveFunction2, p: f64, f: &Observable1, eps_start: f64, halvings: usize) -> Result<ConvergenceReport> {
    run_study(
        psi,
        p,
        eps_start,
        halvings,
        |center| {
            let rho = density_of(psi);
            Ok(Conditioner::new(&rho).expectation(f, center)?.value)
        },
        |state| post_expectation_p1(state, f),
    )
}

/// Post-measurement expectation of `G(P)` as the window shrinks, against
/// `G(center)`.
pub fn total_limit_study(psi: &WaveFunction2, p: f64, g: &Observable1, eps_start: f64, halvings: usize) -> Result<ConvergenceReport> {
    run_study(psi, p, eps_start, halvings, |center| Ok(g.eval(center)), |state| post_expectation_total(state, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditional::{marginal_total, window_probability};
    use crate::grid::make_grid;
    use crate::state::{gaussian_wavefunction, GaussianParams};

    fn psi(mu1: f64, mu2: f64, c: f64) -> WaveFunction2 {
        let params = GaussianParams::new(mu1, mu2, 1.0, c).unwrap();
        let (g1, g2) = params.default_grids();
        gaussian_wavefunction(params, g1, g2).unwrap()
    }

    #[test]
    fn full_range_window_is_identity() {
        let psi = psi(0.0, 0.0, 0.5);
        let lattice = SumLattice::of(&psi).unwrap();
        let g = lattice.grid;
        let w = MeasurementWindow::new(0.5 * (g.min + g.max), 0.5 * (g.max - g.min)).unwrap();
        let state = apply_window(&psi, &w).unwrap();
        assert!((state.norm_prob - 1.0).abs() < 1e-6);
        let diff = (&state.psi.amp - &psi.amp).iter().map(|d| d.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-9);
        assert!(projection_idempotence_check(&psi, &w).unwrap());
    }

    #[test]
    fn one_sigma_window_probability() {
        let psi = psi(0.0, 0.0, 0.5);
        let state = apply_window(&psi, &MeasurementWindow::new(0.0, 3f64.sqrt()).unwrap()).unwrap();
        assert!((state.norm_prob - 0.682_689_492_137_085_9).abs() < 2e-3, "{}", state.norm_prob);
        let marg = marginal_total(&density_of(&psi));
        assert!((state.norm_prob - window_probability(&marg, &state.window).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn far_tail_window_has_zero_probability() {
        let psi = psi(0.0, 0.0, 0.0);
        let err = apply_window(&psi, &MeasurementWindow::new(15.0, 0.2).unwrap()).unwrap_err();
        assert!(matches!(err, Error::ZeroProbabilityWindow { .. }));
        let err = apply_window(&psi, &MeasurementWindow::new(40.0, 0.2).unwrap()).unwrap_err();
        assert!(matches!(err, Error::WindowOutOfRange { .. }));
    }

    #[test]
    fn projected_state_vanishes_off_band() {
        let psi = psi(0.0, 0.0, 0.3);
        let state = apply_window(&psi, &MeasurementWindow::new(0.7, 0.4).unwrap()).unwrap();
        assert!((state.psi.norm_sq() - 1.0).abs() < 1e-9);
        let w = state.window;
        let (p1, p2) = (psi.grid1.points(), psi.grid2.points());
        let cell = psi.grid1.spacing();
        for ((i, j), a) in state.psi.amp.indexed_iter() {
            if ((p1[i] + p2[j]) - w.center).abs() > w.half_width + cell {
                assert_eq!(a.norm(), 0.0);
            }
        }
    }

    #[test]
    fn post_expectations() {
        let psi = psi(2.0, 4.0, 0.3);
        let state = apply_window(&psi, &MeasurementWindow::new(10.0, 0.01).unwrap()).unwrap();
        assert!((post_expectation_p1(&state, &Observable1::constant(1.0)) - 1.0).abs() < 1e-9);
        // the window snaps to one cell on each side of the nearest sum node
        let expected = 2.0 + 0.5 * (state.window.center - 6.0);
        let got = post_expectation_p1(&state, &Observable1::Identity);
        assert!((got - 4.0).abs() < 5e-3);
        assert!((got - expected).abs() < 5e-4);
        let prob = post_expectation_p1(&state, &Observable1::Indicator { lo: 3.5, hi: 4.5 });
        assert!((-1e-9..=1.0 + 1e-9).contains(&prob));
    }

    #[test]
    fn total_momentum_is_sharp_in_the_limit() {
        // grid chosen so that p = 1 is a sum node
        let params = GaussianParams::new(0.0, 0.0, 1.0, 0.0).unwrap();
        let g = make_grid(-7.5, 8.5, 512).unwrap();
        let psi = gaussian_wavefunction(params, g, g).unwrap();
        let state = apply_window(&psi, &MeasurementWindow::new(1.0, 1e-3).unwrap()).unwrap();
        assert!((state.window.center - 1.0).abs() < 1e-12);
        assert!((post_expectation_total(&state, &Observable1::constant(1.0)) - 1.0).abs() < 1e-9);
        assert!((post_expectation_total(&state, &Observable1::Identity) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn squared_total_converges_at_second_order() {
        let psi = psi(0.0, 0.0, 0.0);
        let report = total_limit_study(&psi, 2.0, &Observable1::Square, 1.0, 3).unwrap();
        assert!((report.reference - report.center * report.center).abs() < 1e-15);
        let order = report.fitted_order.unwrap();
        assert!((order - 2.0).abs() < 0.3, "order {order}");
    }

    #[test]
    fn epsilon_study_on_correlated_gaussian() {
        let params = GaussianParams::new(0.0, 0.0, 1.0, 0.5).unwrap();
        let (g1, g2) = params.grids_with(6.0, 3200);
        let psi = gaussian_wavefunction(params, g1, g2).unwrap();
        let report = epsilon_limit_study(&psi, 1.0, &Observable1::Identity, 1.0, 6).unwrap();
        assert!(report.abs_errors.windows(2).all(|w| w[1] < w[0]));
        let order = report.fitted_order.unwrap();
        assert!((order - 2.0).abs() < 0.3, "order {order}");
    }

    #[test]
    fn symmetric_study_is_degenerate() {
        let psi = psi(0.0, 0.0, 0.4);
        let report = epsilon_limit_study(&psi, 0.0, &Observable1::Identity, 1.0, 3).unwrap();
        assert!(report.observable_values.iter().all(|v| v.abs() < 1e-8));
        assert!(report.is_degenerate());
    }

    #[test]
    fn resolution_floor_is_enforced() {
        let psi = psi(0.0, 0.0, 0.0);
        let err = epsilon_limit_study(&psi, 1.0, &Observable1::Identity, 1.0, 6).unwrap_err();
        assert!(matches!(err, Error::WindowResolutionExceeded { .. }));
        assert!(matches!(
            epsilon_limit_study(&psi, 1.0, &Observable1::Identity, 1.0, 2),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn unequal_spacing_is_rejected() {
        let params = GaussianParams::new(0.0, 0.0, 1.0, 0.0).unwrap();
        let psi = gaussian_wavefunction(params, make_grid(-8.0, 8.0, 128).unwrap(), make_grid(-8.0, 8.0, 256).unwrap()).unwrap();
        assert!(matches!(apply_window(&psi, &MeasurementWindow::new(0.0, 1.0).unwrap()), Err(Error::IncompatibleGrids(_))));
    }
}
