//! Closed forms for the correlated Gaussian state in the centered coordinates
//! `ξ = p1 - μ1` and `ζ = (p1 + p2) - μ`.

use serde::{Deserialize, Serialize};

use crate::conditional::complementary_split;
use crate::state::GaussianParams;

/// Symmetric covariance of `(ξ, ζ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceMatrix {
    pub s11: f64,
    pub s12: f64,
    pub s22: f64,
}

impl CovarianceMatrix {
    pub fn determinant(&self) -> f64 {
        self.s11 * self.s22 - self.s12 * self.s12
    }

    pub fn is_positive_definite(&self) -> bool {
        self.s11 > 0.0 && self.s22 > 0.0 && self.determinant() > 0.0
    }

    pub fn as_array(&self) -> [[f64; 2]; 2] {
        [[self.s11, self.s12], [self.s12, self.s22]]
    }
}

/// `Σ = [[σ², σ²(1+c)], [σ²(1+c), 2σ²(1+c)]]`.
pub fn sigma_matrix(params: &GaussianParams) -> CovarianceMatrix {
    let s2 = params.sigma * params.sigma;
    CovarianceMatrix { s11: s2, s12: s2 * (1.0 + params.c), s22: 2.0 * s2 * (1.0 + params.c) }
}

/// The inverse in its displayed closed form,
/// `(1 / σ²(1-c²)) [[2(1+c), -(1+c)], [-(1+c), 1]]`.
pub fn sigma_inverse(params: &GaussianParams) -> [[f64; 2]; 2] {
    let c = params.c;
    let k = 1.0 / (params.sigma * params.sigma * (1.0 - c * c));
    [[2.0 * (1.0 + c) * k, -(1.0 + c) * k], [-(1.0 + c) * k, k]]
}

/// Sup-norm of `Σ Σ⁻¹ - I` using the two closed forms.
pub fn sigma_inverse_check(params: &GaussianParams) -> f64 {
    let a = sigma_matrix(params).as_array();
    let b = sigma_inverse(params);
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let prod = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((prod - target).abs());
        }
    }
    worst
}

/// Exponent of the joint density written in `(ξ, ζ)` before collecting terms:
/// `(ξ² - 2cξ(ζ-ξ) + (ζ-ξ)²) / σ²(1-c²)`.
pub fn exponent_direct(params: &GaussianParams, xi: f64, zeta: f64) -> f64 {
    let c = params.c;
    let eta = zeta - xi;
    (xi * xi - 2.0 * c * xi * eta + eta * eta) / (params.sigma * params.sigma * (1.0 - c * c))
}

/// The same exponent as the quadratic form `(ξ, ζ) Σ⁻¹ (ξ, ζ)ᵗ`.
pub fn exponent_quadratic(params: &GaussianParams, xi: f64, zeta: f64) -> f64 {
    let m = sigma_inverse(params);
    xi * (m[0][0] * xi + m[0][1] * zeta) + zeta * (m[1][0] * xi + m[1][1] * zeta)
}

/// `E[p1 | P = p] = μ1 + (s12 / s22)(p - μ)`; the coefficient is exactly ½
/// for equal variances.
pub fn linear_predictor_p1(params: &GaussianParams, p: f64) -> f64 {
    let sigma = sigma_matrix(params);
    let value = params.mu1 + sigma.s12 / sigma.s22 * (p - params.mu());
    complementary_split(p, value).0
}

/// `E[P - p1 | P = p] = p - E[p1 | P = p] = ½(p + (μ2 - μ1))`.
pub fn linear_predictor_p2(params: &GaussianParams, p: f64) -> f64 {
    let sigma = sigma_matrix(params);
    let value = params.mu1 + sigma.s12 / sigma.s22 * (p - params.mu());
    complementary_split(p, value).1
}

/// Schur complement `s11 - s12² / s22 = σ²(1-c)/2`.
pub fn conditional_variance_p1(params: &GaussianParams) -> f64 {
    let s = sigma_matrix(params);
    s.s11 - s.s12 * s.s12 / s.s22
}

/// Mean and variance of the total momentum, `(μ1 + μ2, 2σ²(1+c))`.
pub fn total_moments(params: &GaussianParams) -> (f64, f64) {
    (params.mu(), sigma_matrix(params).s22)
}
