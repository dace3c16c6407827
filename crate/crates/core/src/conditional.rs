//! Total-momentum marginal, window probabilities, and conditional densities
//! and expectations of the first particle's momentum given the total.
//!
//! Line integrals along the anti-diagonal `p1 + p2 = p` average two trapezoid
//! sums: one over the `p1` nodes with linear interpolation in `p2`, and one
//! over the `p2` nodes with linear interpolation in `p1`. The average treats
//! both particles alike, so exchange-symmetric states split `p` evenly to
//! rounding.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{integrate_between, trapezoid, GridSpec};
use crate::measurement::MeasurementWindow;
use crate::observable::Observable1;
use crate::state::{Density1, Density2};

/// Relative floor below which the total-momentum density is treated as a
/// negligible event.
pub const NEGLIGIBLE_FLOOR: f64 = 1e-12;

/// `ρ(p1 | p)` over the first grid for a measured total momentum `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalDensity {
    pub conditioning_p: f64,
    pub grid: GridSpec,
    pub val: Vec<f64>,
}

impl ConditionalDensity {
    pub fn mass(&self) -> f64 {
        trapezoid(&self.grid, &self.val)
    }

    /// `(mean, variance)` of `p1` under the conditional density.
    pub fn moments(&self) -> (f64, f64) {
        Density1 { grid: self.grid, val: self.val.clone() }.moments()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Quadrature,
    Analytic,
    MonteCarlo,
}

/// A predicted value conditioned on a measured total momentum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    pub value: f64,
    pub conditioning_p: f64,
    pub method: Method,
    pub std_error: Option<f64>,
}

/// Grid of reachable total momenta: `n1 + n2 - 1` nodes over the exact sum range.
pub fn sum_grid(grid1: &GridSpec, grid2: &GridSpec) -> GridSpec {
    GridSpec::derived(grid1.min + grid2.min, grid1.max + grid2.max, grid1.n + grid2.n - 1)
}

/// `ρ(p1_i, p - p1_i)` for every node of the first grid.
pub(crate) fn antidiagonal(rho: &Density2, p: f64) -> Vec<f64> {
    let g1 = &rho.grid1;
    let g2 = &rho.grid2;
    (0..g1.n)
        .map(|i| match g2.locate(p - g1.point(i)) {
            Some((j, t)) => (1.0 - t) * rho.val[[i, j]] + t * rho.val[[i, j + 1]],
            None => 0.0,
        })
        .collect()
}

/// `ρ(p - p2_j, p2_j)` for every node of the second grid.
fn antidiagonal_by_p2(rho: &Density2, p: f64) -> Vec<f64> {
    let g1 = &rho.grid1;
    let g2 = &rho.grid2;
    (0..g2.n)
        .map(|j| match g1.locate(p - g2.point(j)) {
            Some((i, t)) => (1.0 - t) * rho.val[[i, j]] + t * rho.val[[i + 1, j]],
            None => 0.0,
        })
        .collect()
}

/// `(∫ ρ dl, ∫ g(p1) ρ dl)` along the line `p1 + p2 = p`.
fn line_integrals(rho: &Density2, p: f64, g: Option<&Observable1>) -> (f64, f64) {
    let (g1, g2) = (&rho.grid1, &rho.grid2);
    let mut mass = 0.0;
    let mut moment = 0.0;
    for (i, v) in antidiagonal(rho, p).into_iter().enumerate() {
        let wv = g1.weight(i) * v;
        mass += wv;
        if let Some(g) = g {
            moment += g.eval(g1.point(i)) * wv;
        }
    }
    let mut mass2 = 0.0;
    let mut moment2 = 0.0;
    for (j, v) in antidiagonal_by_p2(rho, p).into_iter().enumerate() {
        let wv = g2.weight(j) * v;
        mass2 += wv;
        if let Some(g) = g {
            moment2 += g.eval(p - g2.point(j)) * wv;
        }
    }
    (0.5 * (mass + mass2), 0.5 * (moment + moment2))
}

/// Density of the total momentum, `ρ_P(p) = ∫ ρ(p1, p - p1) dp1`.
///
/// No renormalization is applied; unit mass follows from the unit Jacobian of
/// `(p1, p2) -> (p1, p1 + p2)`.
pub fn marginal_total(rho: &Density2) -> Density1 {
    let grid = sum_grid(&rho.grid1, &rho.grid2);
    let val = (0..grid.n).into_par_iter().map(|k| line_integrals(rho, grid.point(k), None).0).collect();
    Density1 { grid, val }
}

/// Probability that the total momentum falls in the window, by the trapezoid
/// rule with linearly interpolated endpoints.
pub fn window_probability(marg: &Density1, window: &MeasurementWindow) -> Result<f64> {
    let lo = window.center - window.half_width;
    let hi = window.center + window.half_width;
    let g = &marg.grid;
    if !(g.contains(lo) && g.contains(hi)) {
        return Err(Error::WindowOutOfRange { lo, hi, min: g.min, max: g.max });
    }
    Ok(integrate_between(g, &marg.val, lo, hi))
}

/// Conditioning machinery for one joint density; caches the total-momentum
/// marginal used for the negligible-event floor.
#[derive(Debug, Clone)]
pub struct Conditioner<'a> {
    rho: &'a Density2,
    marginal: Density1,
    floor: f64,
}

impl<'a> Conditioner<'a> {
    pub fn new(rho: &'a Density2) -> Self {
        let marginal = marginal_total(rho);
        let floor = NEGLIGIBLE_FLOOR * marginal.max_value();
        Conditioner { rho, marginal, floor }
    }

    pub fn marginal(&self) -> &Density1 {
        &self.marginal
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    fn check(&self, mass: f64) -> Result<()> {
        if !(mass >= self.floor && mass > 0.0) {
            return Err(Error::NegligibleEvent { density: mass, floor: self.floor });
        }
        Ok(())
    }

    fn check_range(&self, p: f64) -> Result<()> {
        let range = &self.marginal.grid;
        if !p.is_finite() || !range.contains(p) {
            return Err(Error::OutOfRange { p, min: range.min, max: range.max });
        }
        Ok(())
    }

    /// The conditional density over the first grid, normalized to unit
    /// trapezoid mass.
    pub fn density(&self, p: f64) -> Result<ConditionalDensity> {
        self.check_range(p)?;
        let slice = antidiagonal(self.rho, p);
        let mass = trapezoid(&self.rho.grid1, &slice);
        self.check(line_integrals(self.rho, p, None).0)?;
        if mass <= 0.0 {
            return Err(Error::NegligibleEvent { density: mass, floor: self.floor });
        }
        Ok(ConditionalDensity {
            conditioning_p: p,
            grid: self.rho.grid1,
            val: slice.into_iter().map(|v| v / mass).collect(),
        })
    }

    pub fn expectation(&self, g: &Observable1, p: f64) -> Result<PredictionResult> {
        self.check_range(p)?;
        let (mass, moment) = line_integrals(self.rho, p, Some(g));
        self.check(mass)?;
        Ok(PredictionResult { value: moment / mass, conditioning_p: p, method: Method::Quadrature, std_error: None })
    }

    pub fn predict_p1(&self, p: f64) -> Result<PredictionResult> {
        let mut r = self.expectation(&Observable1::Identity, p)?;
        r.value = complementary_split(p, r.value).0;
        Ok(r)
    }

    /// `p - E[p1 | p]`, by subtraction.
    pub fn predict_p2(&self, p: f64) -> Result<PredictionResult> {
        let r = self.expectation(&Observable1::Identity, p)?;
        Ok(PredictionResult { value: complementary_split(p, r.value).1, ..r })
    }
}

/// Splits `p` into `(a', p - a')` with `a'` within a few ulps of `a` and the
/// floating-point sum of the two parts equal to `p` bit for bit.
pub(crate) fn complementary_split(p: f64, a: f64) -> (f64, f64) {
    let b = p - a;
    if a + b == p {
        return (a, b);
    }
    // exact whenever p and b are within a factor of two of each other
    let a2 = p - b;
    if a2 + b == p {
        return (a2, b);
    }
    let mut lo = a;
    let mut hi = a;
    for _ in 0..64 {
        lo = next_down(lo);
        hi = next_up(hi);
        for cand in [hi, lo] {
            let b = p - cand;
            if cand + b == p {
                return (cand, b);
            }
        }
    }
    (a, b)
}

fn next_up(x: f64) -> f64 {
    if x == 0.0 {
        return f64::from_bits(1);
    }
    let bits = x.to_bits();
    f64::from_bits(if x > 0.0 { bits + 1 } else { bits - 1 })
}

fn next_down(x: f64) -> f64 {
    -next_up(-x)
}

pub fn conditional_density(rho: &Density2, p: f64) -> Result<ConditionalDensity> {
    Conditioner::new(rho).density(p)
}

/// `E[g(p1) | P = p] = ∫ g(p1) ρ(p1, p - p1) dp1 / ρ_P(p)`.
pub fn conditional_expectation(rho: &Density2, g: &Observable1, p: f64) -> Result<PredictionResult> {
    Conditioner::new(rho).expectation(g, p)
}

pub fn predict_p1(rho: &Density2, p: f64) -> Result<PredictionResult> {
    Conditioner::new(rho).predict_p1(p)
}

pub fn predict_p2(rho: &Density2, p: f64) -> Result<PredictionResult> {
    Conditioner::new(rho).predict_p2(p)
}

/// Both sides of `E[g(p1) h(P)] = ∫ h(p) E[g(p1) | P = p] ρ_P(p) dp`.
///
/// The left side is a direct double integral; the right side composes the
/// marginal with conditional expectations at every node of the sum grid.
/// Nodes below the negligible-event floor are skipped.
pub fn tower_check(rho: &Density2, g: &Observable1, h: &Observable1) -> (f64, f64) {
    use crate::observable::Observable2;
    use crate::state::expectation;

    let lhs = expectation(rho, &Observable2::product(Observable2::of_p1(g.clone()), Observable2::of_total(h.clone())));
    let cond = Conditioner::new(rho);
    let marg = cond.marginal();
    let terms: Vec<f64> = (0..marg.grid.n)
        .into_par_iter()
        .map(|k| {
            let p = marg.grid.point(k);
            match cond.expectation(g, p) {
                Ok(e) => marg.grid.weight(k) * h.eval(p) * e.value * marg.val[k],
                Err(_) => 0.0,
            }
        })
        .collect();
    (lhs, terms.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::state::{density_of, gaussian_wavefunction, GaussianParams};

    fn gaussian(mu1: f64, mu2: f64, sigma: f64, c: f64) -> Density2 {
        let params = GaussianParams::new(mu1, mu2, sigma, c).unwrap();
        let (g1, g2) = params.default_grids();
        density_of(&gaussian_wavefunction(params, g1, g2).unwrap())
    }

    #[test]
    fn marginal_of_correlated_gaussian() {
        let marg = marginal_total(&gaussian(0.0, 0.0, 1.0, 0.5));
        assert_eq!(marg.grid.n, 1023);
        assert!((marg.mass() - 1.0).abs() < 1e-6);
        let (mean, var) = marg.moments();
        assert!(mean.abs() < 1e-9);
        assert!((var - 3.0).abs() < 1e-3);
    }

    #[test]
    fn marginal_is_even_for_point_symmetric_state() {
        let marg = marginal_total(&gaussian(0.0, 0.0, 1.0, 0.3));
        let n = marg.val.len();
        for k in 0..n {
            assert!((marg.val[k] - marg.val[n - 1 - k]).abs() < 1e-10);
        }
    }

    #[test]
    fn window_probability_examples() {
        let marg = marginal_total(&gaussian(0.0, 0.0, 1.0, 0.5));
        let g = marg.grid;
        let full = MeasurementWindow { center: 0.5 * (g.min + g.max), half_width: 0.5 * (g.max - g.min) };
        assert!((window_probability(&marg, &full).unwrap() - 1.0).abs() < 1e-6);
        let e = 3f64.sqrt();
        let one_sigma = window_probability(&marg, &MeasurementWindow { center: 0.0, half_width: e }).unwrap();
        assert!((one_sigma - 0.682_689_492_137_085_9).abs() < 1e-3);
        let eps = 1e-3;
        let narrow = window_probability(&marg, &MeasurementWindow { center: 0.4, half_width: eps }).unwrap();
        assert!((narrow / (2.0 * eps) - marg.value_at(0.4)).abs() < 1e-4);
        let outside = MeasurementWindow { center: g.max, half_width: 1.0 };
        assert!(matches!(window_probability(&marg, &outside), Err(Error::WindowOutOfRange { .. })));
    }

    #[test]
    fn conditional_density_examples() {
        let rho = gaussian(0.0, 0.0, 1.0, 0.0);
        let cond = conditional_density(&rho, 0.0).unwrap();
        assert!((cond.mass() - 1.0).abs() < 1e-6);
        let (mean, var) = cond.moments();
        assert!(mean.abs() < 1e-3);
        assert!((var - 0.5).abs() < 1e-3);
        let (mean, _) = conditional_density(&rho, 2.0).unwrap().moments();
        assert!((mean - 1.0).abs() < 1e-3);
        assert!(matches!(conditional_density(&rho, 40.0), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn conditioning_in_the_far_tail_is_negligible() {
        let rho = gaussian(0.0, 0.0, 1.0, 0.0);
        assert!(matches!(conditional_density(&rho, 15.5), Err(Error::NegligibleEvent { .. })));
    }

    #[test]
    fn conditional_expectation_examples() {
        let rho = gaussian(2.0, 4.0, 1.0, 0.3);
        let one = conditional_expectation(&rho, &Observable1::constant(1.0), 10.0).unwrap();
        assert!((one.value - 1.0).abs() < 1e-8);
        let r = conditional_expectation(&rho, &Observable1::Identity, 10.0).unwrap();
        assert!((r.value - 4.0).abs() < 1e-3);
        assert_eq!(r.method, Method::Quadrature);
        assert!(r.std_error.is_none());
    }

    #[test]
    fn predictors() {
        for c in [-0.5, 0.0, 0.7] {
            let rho = gaussian(0.0, 0.0, 1.0, c);
            assert!(predict_p1(&rho, 0.0).unwrap().value.abs() < 1e-6);
        }
        let rho = gaussian(2.0, 4.0, 1.0, 0.3);
        assert!((predict_p1(&rho, 10.0).unwrap().value - 4.0).abs() < 1e-3);
        assert!((predict_p2(&rho, 10.0).unwrap().value - 6.0).abs() < 1e-3);
        let rho = gaussian(1.5, 1.5, 1.0, 0.2);
        for p in [1.0, 3.0, 4.2] {
            let v = predict_p1(&rho, p).unwrap().value;
            assert!((v - p / 2.0).abs() < 1e-6, "p={p} v={v}");
            assert!((predict_p2(&rho, p).unwrap().value - p / 2.0).abs() < 1e-6);
        }
    }

    #[test]
    fn split_is_exact() {
        for (p, a) in [(0.3, 0.1), (10.0, 4.000_000_1), (1.0, 1e-17), (-3.7, 2.9), (1e-3, 4e-4)] {
            let (x, y) = complementary_split(p, a);
            assert_eq!(x + y, p);
            assert!((x - a).abs() <= 1e-12 * a.abs().max(1e-300) + f64::EPSILON * p.abs());
        }
    }

    #[test]
    fn tower_with_trivial_h() {
        let rho = gaussian(0.4, -0.2, 1.0, 0.3);
        let (lhs, rhs) = tower_check(&rho, &Observable1::Identity, &Observable1::constant(1.0));
        assert!((lhs - 0.4).abs() < 1e-5);
        assert!((rhs - 0.4).abs() < 1e-5);
        let (lhs, rhs) = tower_check(&gaussian(0.0, 0.0, 1.0, 0.5), &Observable1::Identity, &Observable1::Identity);
        assert!((lhs - 1.5).abs() < 1e-3 && (rhs - 1.5).abs() < 1e-3);
    }

    #[test]
    fn unequal_grids_are_supported() {
        let params = GaussianParams::new(0.0, 0.0, 1.0, 0.2).unwrap();
        let g1 = make_grid(-8.0, 8.0, 256).unwrap();
        let g2 = make_grid(-9.0, 9.0, 400).unwrap();
        let rho = density_of(&gaussian_wavefunction(params, g1, g2).unwrap());
        let marg = marginal_total(&rho);
        assert!((marg.mass() - 1.0).abs() < 1e-4);
        assert!((predict_p1(&rho, 1.0).unwrap().value - 0.5).abs() < 1e-3);
    }
}
