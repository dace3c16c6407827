//! End-to-end walkthrough for a Gaussian state: the total-momentum
//! distribution, the predictor line, the projection-versus-conditional
//! convergence and the uncertainty ladder, plus the remaining consistency
//! checks, each judged against its acceptance tolerance.

use std::fmt::Write as _;
use std::result::Result;

use qpredict_core::gaussian::{sigma_inverse_check, sigma_matrix};
use qpredict_core::measurement::SumLattice;
use qpredict_core::*;
use serde_json::{json, Value};

use crate::commands::{Context, Outcome};
use crate::output::{to_json, Artifacts};
use crate::{CliError, Command};

/// Largest grid used for the window ladders.
const MAX_FINE_POINTS: usize = 3200;
const FINE_HALF_WIDTH_SIGMAS: f64 = 6.0;

struct Section {
    name: &'static str,
    pass: bool,
    summary: String,
    data: Value,
}

/// Even point count whose spacing over `±6σ` is at most `eps_min / 4`.
fn points_for(sigma: f64, eps_min: f64) -> usize {
    let n = (2.0 * FINE_HALF_WIDTH_SIGMAS * sigma * 4.0 / eps_min).ceil() as usize + 1;
    (n + n % 2).max(qpredict_core::state::DEFAULT_POINTS)
}

/// Window ladder start and halving count: as many halvings (3 to 6) as fit
/// on a grid of at most [`MAX_FINE_POINTS`] points.
fn ladder(params: &GaussianParams, sd_total: f64) -> (f64, usize, usize) {
    let eps0 = sd_total.min(1.0);
    for halvings in (3..=6).rev() {
        let n = points_for(params.sigma, eps0 / f64::from(1u32 << halvings));
        if n <= MAX_FINE_POINTS || halvings == 3 {
            return (eps0, halvings, n);
        }
    }
    unreachable!()
}

fn distribution(rho: &Density2, params: &GaussianParams) -> Section {
    let marg = marginal_total(rho);
    let (mean, var) = marg.moments();
    let (mu, var_want) = total_moments(params);
    let sd = var_want.sqrt();
    let max_dev = marg
        .grid
        .points()
        .iter()
        .zip(&marg.val)
        .filter(|(p, _)| (*p - mu).abs() <= 4.0 * sd)
        .map(|(p, v)| {
            let z = (p - mu) / sd;
            (v - (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())).abs()
        })
        .fold(0.0, f64::max);
    let mass_err = (marg.mass() - 1.0).abs();
    let var_rel = ((var - var_want) / var_want).abs();
    let mean_err = (mean - mu).abs();
    Section {
        name: "total_momentum_distribution",
        pass: mass_err <= 1e-6 && var_rel <= 1e-3 && mean_err <= 1e-3 * sd.max(1.0),
        summary: format!("mass {:.9}, mean {mean:.6} (exact {mu}), variance {var:.6} (exact {var_want:.6})", marg.mass()),
        data: json!({
            "mass": marg.mass(),
            "mean": mean,
            "variance": var,
            "exact_mean": mu,
            "exact_variance": var_want,
            "max_abs_deviation_within_4sd": max_dev,
        }),
    }
}

fn predictor_line(rho: &Density2, params: &GaussianParams) -> Result<Section, CliError> {
    let cond = Conditioner::new(rho);
    let (mu, var) = total_moments(params);
    let sd = var.sqrt();
    let mut rows = Vec::new();
    let (mut worst, mut exact) = (0.0f64, true);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for k in -4..=4 {
        let p = mu + f64::from(k) * sd;
        let a = cond.predict_p1(p)?.value;
        let b = cond.predict_p2(p)?.value;
        let linear = linear_predictor_p1(params, p);
        worst = worst.max((a - linear).abs());
        exact &= a + b == p && linear + linear_predictor_p2(params, p) == p;
        xs.push(p);
        ys.push(a);
        rows.push(json!({"p": p, "predict_p1": a, "predict_p2": b, "linear_p1": linear, "linear_p2": linear_predictor_p2(params, p)}));
    }
    let xm = xs.iter().sum::<f64>() / xs.len() as f64;
    let ym = ys.iter().sum::<f64>() / ys.len() as f64;
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum::<f64>()
        / xs.iter().map(|x| (x - xm).powi(2)).sum::<f64>();
    Ok(Section {
        name: "predictor_line",
        pass: worst <= 1e-3 && (slope - 0.5).abs() <= 1e-3 && exact,
        summary: format!("slope {slope:.6}, max |quadrature - linear| {worst:.3e}, predictor sums exact: {exact}"),
        data: json!({
            "rows": rows,
            "slope": slope,
            "max_abs_error": worst,
            "sums_exact": exact,
            "second_predictor_example": {
                "mu1": 2.0, "mu2": 4.0, "p": 10.0,
                "by_subtraction": 6.0,
                "alternative_sign_reading": 4.0,
            },
        }),
    })
}

fn convergence(fine: &WaveFunction2, params: &GaussianParams, eps0: f64, halvings: usize) -> Result<Section, CliError> {
    let (mu, var) = total_moments(params);
    let p = mu + 0.5 * var.sqrt();
    let study = epsilon_limit_study(fine, p, &Observable1::Identity, eps0, halvings)?;
    let order = study.fitted_order;
    let mut pass = order.is_some_and(|o| (1.7..=2.3).contains(&o)) && study.final_error() <= 5e-4;
    let mut totals = Vec::new();
    for g in [Observable1::Identity, Observable1::Square] {
        let r = total_limit_study(fine, p, &g, eps0, halvings)?;
        pass &= r.final_error() <= 5e-4;
        totals.push(json!({"observable": g.to_string(), "final_error": r.final_error(), "fitted_order": r.fitted_order}));
    }
    Ok(Section {
        name: "projection_convergence",
        pass,
        summary: format!(
            "eps {eps0:.4} -> {:.4} on a {n}x{n} grid: fitted order {}, final error {:.3e}",
            study.eps_values.last().unwrap(),
            order.map_or("none".to_string(), |o| format!("{o:.3}")),
            study.final_error(),
            n = fine.grid1.n
        ),
        data: json!({
            "grid_points": fine.grid1.n,
            "center": study.center,
            "eps_values": study.eps_values,
            "observable_values": study.observable_values,
            "reference": study.reference,
            "abs_errors": study.abs_errors,
            "fitted_order": order,
            "total_momentum_studies": totals,
        }),
    })
}

fn uncertainty_ladder(psi: &WaveFunction2, fine: &WaveFunction2, params: &GaussianParams, eps0: f64, m1: f64, m2: f64) -> Result<Section, CliError> {
    let r = uncertainty_report(psi, m1, m2)?;
    let floor = position::UNCERTAINTY_BOUND;
    let mut pass = r.products.0 >= floor * (1.0 - 1e-3) && r.products.1 >= floor * (1.0 - 1e-3) && r.products.2 >= floor * (1.0 - 1e-2);
    let separable = params.c == 0.0;
    if separable {
        pass &= (r.products.0 - floor).abs() <= 1e-3 && (r.products.1 - floor).abs() <= 1e-3;
    }
    let eps: Vec<f64> = (0..4).map(|k| eps0 / f64::from(1u32 << k)).collect();
    let rows = cm_variance_vs_epsilon(fine, params.mu(), &eps, m1, m2)?;
    let xcm_up = rows.windows(2).all(|w| w[1].sd_xcm > w[0].sd_xcm);
    let p_down = rows.windows(2).all(|w| w[1].sd_ptotal < w[0].sd_ptotal);
    let min_product = rows.iter().map(|r| r.product).fold(f64::INFINITY, f64::min);
    pass &= xcm_up && p_down && min_product >= floor * (1.0 - 1e-2);
    Ok(Section {
        name: "uncertainty_ladder",
        pass,
        summary: format!(
            "products x1p1 {:.6}, x2p2 {:.6}, xcm.P {:.6}; after measuring P: sd_xcm {} and sd_P {}",
            r.products.0,
            r.products.1,
            r.products.2,
            rows.iter().map(|r| format!("{:.4}", r.sd_xcm)).collect::<Vec<_>>().join(" < "),
            rows.iter().map(|r| format!("{:.4}", r.sd_ptotal)).collect::<Vec<_>>().join(" > "),
        ),
        data: json!({
            "state": r,
            "separable": separable,
            "cm_ladder": rows,
            "sd_xcm_increasing": xcm_up,
            "sd_ptotal_decreasing": p_down,
            "min_ladder_product": min_product,
        }),
    })
}

fn windows_and_tower(psi: &WaveFunction2, rho: &Density2, params: &GaussianParams) -> Result<Section, CliError> {
    let (mu, var) = total_moments(params);
    let sd = var.sqrt();
    let marg = marginal_total(rho);
    let mut prob_err = 0.0f64;
    let mut idempotent = true;
    for (dc, eps) in [(-1.0, 0.1), (0.0, 1.0), (0.5, 0.25), (1.3, 0.5), (2.0, 0.75)] {
        let w = MeasurementWindow::new(mu + dc * sd, eps * sd)?;
        let post = apply_window(psi, &w)?;
        prob_err = prob_err.max((post.norm_prob - window_probability(&marg, &post.window)?).abs());
        idempotent &= projection_idempotence_check(psi, &w)?;
    }
    let fs = [Observable1::constant(1.0), Observable1::Identity, Observable1::Square];
    let mut tower = 0.0f64;
    for g in &fs {
        for h in &fs {
            let (lhs, rhs) = tower_check(rho, g, h);
            tower = tower.max((lhs - rhs).abs() / lhs.abs().max(1.0));
        }
    }
    let s = sigma_matrix(params);
    let xi = Observable2::sum(Observable2::p1(), Observable2::Constant { value: -params.mu1 });
    let zeta = Observable2::sum(Observable2::total(), Observable2::Constant { value: -mu });
    let numeric = [variance(rho, &Observable2::p1()), expectation(rho, &Observable2::product(xi, zeta)), variance(rho, &Observable2::total())];
    let cov_rel = numeric.iter().zip([s.s11, s.s12, s.s22]).map(|(n, e)| ((n - e) / e).abs()).fold(0.0, f64::max);
    let inverse = sigma_inverse_check(params);
    Ok(Section {
        name: "consistency",
        pass: prob_err <= 1e-6 && idempotent && tower <= 1e-4 && cov_rel <= 1e-3 && inverse <= 1e-12,
        summary: format!(
            "window probabilities agree to {prob_err:.1e}, projections idempotent: {idempotent}, tower {tower:.1e}, covariance {cov_rel:.1e}, inverse {inverse:.1e}"
        ),
        data: json!({
            "max_window_probability_gap": prob_err,
            "idempotent": idempotent,
            "max_tower_gap": tower,
            "covariance_numeric": numeric,
            "covariance_exact": s,
            "max_covariance_rel_error": cov_rel,
            "sigma_inverse_residual": inverse,
        }),
    })
}

fn monte_carlo(rho: &Density2, params: &GaussianParams, n: usize, seed: u64) -> Result<Section, CliError> {
    let (mu, var) = total_moments(params);
    let sd = var.sqrt();
    let p = mu + 0.5 * sd;
    let eps = (sd / 8.0).min(0.05);
    let reference = conditional_expectation(rho, &Observable1::Identity, p)?.value;
    let samples = sample(SamplingSource::Gaussian(*params), n, seed)?;
    let est = empirical_conditional(&samples, &MeasurementWindow::new(p, eps)?, &Observable1::Identity)?;
    let m = total_momentum_moments(&samples);
    let mean_ok = (est.mean - reference).abs() <= 4.0 * est.std_error;
    let var_ok = (m.variance - var).abs() <= 3.0 * m.variance_se;
    Ok(Section {
        name: "monte_carlo",
        pass: mean_ok && var_ok,
        summary: format!(
            "seed {seed}: conditional mean {:.5} +- {:.5} vs quadrature {reference:.5}; total variance {:.5} +- {:.5} vs {var:.5}",
            est.mean, est.std_error, m.variance, m.variance_se
        ),
        data: json!({
            "seed": seed,
            "samples": n,
            "window": {"center": p, "half_width": eps},
            "empirical": est,
            "quadrature": reference,
            "total_variance": m.variance,
            "total_variance_se": m.variance_se,
            "exact_total_variance": var,
        }),
    })
}

pub fn run(ctx: &Context) -> Result<Outcome, CliError> {
    let Command::Report { seed, samples, m1, m2 } = *ctx.command else {
        unreachable!("report dispatch");
    };
    let params = ctx.gaussian()?;
    let psi = &ctx.loaded.psi;
    let rho = density_of(psi);
    let sd_total = total_moments(&params).1.sqrt();
    let (eps0, halvings, n) = ladder(&params, sd_total);
    let (g1, g2) = params.grids_with(FINE_HALF_WIDTH_SIGMAS, n);
    let fine = gaussian_wavefunction(params, g1, g2)?;
    SumLattice::of(&fine)?;

    let sections = vec![
        distribution(&rho, &params),
        predictor_line(&rho, &params)?,
        convergence(&fine, &params, eps0, halvings)?,
        uncertainty_ladder(psi, &fine, &params, eps0, m1, m2)?,
        windows_and_tower(psi, &rho, &params)?,
        monte_carlo(&rho, &params, samples, seed)?,
    ];
    let all_pass = sections.iter().all(|s| s.pass);

    let mut md = String::new();
    let _ = writeln!(md, "# qpredict report\n");
    let _ = writeln!(
        md,
        "Gaussian state mu1 = {}, mu2 = {}, sigma = {}, c = {}; grid {}x{}.\n",
        params.mu1, params.mu2, params.sigma, params.c, psi.grid1.n, psi.grid2.n
    );
    for s in &sections {
        let _ = writeln!(md, "- **{}** {}: {}", if s.pass { "PASS" } else { "FAIL" }, s.name, s.summary);
    }
    let _ = writeln!(md, "\nOverall: {}", if all_pass { "PASS" } else { "FAIL" });

    let mut body = json!({"all_pass": all_pass, "sections": {}});
    for s in sections {
        body["sections"][s.name] = json!({"pass": s.pass, "summary": s.summary, "data": s.data});
    }
    let mut artifacts = Artifacts::default();
    artifacts.add("report.md", md.into_bytes());
    body["config"] = ctx.config.clone();
    let bytes = to_json(&body);
    artifacts.add("report.json", bytes.clone());
    Ok(Outcome { artifacts, summary: bytes })
}
