//! Empirical convergence orders from error sequences.

/// Errors at or below this level are treated as exact and left out of fits.
pub const ERROR_FLOOR: f64 = 1e-10;

/// Least-squares slope of `ln(error)` against `ln(h)` over the points whose
/// error exceeds [`ERROR_FLOOR`]. `None` when fewer than two points remain.
pub fn fit_order(h: &[f64], errors: &[f64]) -> Option<f64> {
    assert_eq!(h.len(), errors.len());
    let pts: Vec<(f64, f64)> = h
        .iter()
        .zip(errors)
        .filter(|(x, e)| **x > 0.0 && **e > ERROR_FLOOR)
        .map(|(x, e)| (x.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Observed order between consecutive refinements,
/// `ln(e_k / e_{k+1}) / ln(h_k / h_{k+1})`.
pub fn pairwise_orders(h: &[f64], errors: &[f64]) -> Vec<f64> {
    h.windows(2)
        .zip(errors.windows(2))
        .map(|(hw, ew)| (ew[0] / ew[1]).ln() / (hw[0] / hw[1]).ln())
        .collect()
}
