//! Command implementations. Each returns its artifacts and the JSON summary
//! printed on stdout; nothing touches the file system before the whole
//! computation succeeded.

use qpredict_core::gaussian::{sigma_inverse, sigma_inverse_check, sigma_matrix};
use qpredict_core::measurement::SumLattice;
use qpredict_core::*;
use serde::Serialize;
use serde_json::{json, Value};
use std::result::Result;

use crate::output::{csv, to_json, Artifacts};
use crate::{Cli, CliError, Command};

pub struct Outcome {
    pub artifacts: Artifacts,
    pub summary: Vec<u8>,
}

/// The resolved inputs echoed into every JSON artifact.
#[derive(Serialize)]
pub struct RunConfig<'a> {
    pub state_path: String,
    pub state: &'a StateFile,
    #[serde(flatten)]
    pub command: &'a Command,
}

pub struct Context<'a> {
    pub loaded: LoadedState,
    pub config: Value,
    pub command: &'a Command,
}

impl Context<'_> {
    pub fn gaussian(&self) -> Result<GaussianParams, CliError> {
        self.loaded
            .gaussian
            .ok_or_else(|| CliError::Config("this command needs a Gaussian state file".into()))
    }

    /// Adds the config echo and stages `name.json` as the summary.
    fn finish(&self, mut artifacts: Artifacts, name: &str, mut body: Value) -> Outcome {
        body["config"] = self.config.clone();
        let bytes = to_json(&body);
        artifacts.add(&format!("{name}.json"), bytes.clone());
        Outcome { artifacts, summary: bytes }
    }
}

fn positive(name: &str, x: f64) -> Result<(), CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("--{name} must be positive and finite, got {x}")))
    }
}

fn finite(name: &str, x: f64) -> Result<(), CliError> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("--{name} must be finite, got {x}")))
    }
}

/// Option checks that need no state.
fn validate(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Marginal => {}
        Command::Condexp { p, .. } => finite("p", *p)?,
        Command::Measure { p, eps, .. } => {
            finite("p", *p)?;
            positive("eps", *eps)?;
        }
        Command::Converge { p, eps_start, halvings, .. } => {
            finite("p", *p)?;
            positive("eps-start", *eps_start)?;
            if *halvings < 3 {
                return Err(CliError::Config(format!("--halvings must be at least 3, got {halvings}")));
            }
        }
        Command::Gaussian { p } => {
            for x in p {
                finite("p", *x)?;
            }
        }
        Command::Uncertainty { m1, m2, cm_eps, cm_p } => {
            positive("m1", *m1)?;
            positive("m2", *m2)?;
            for e in cm_eps {
                positive("cm-eps", *e)?;
            }
            if cm_eps.windows(2).any(|w| !(w[1] < w[0])) {
                return Err(CliError::Config("--cm-eps must be strictly decreasing".into()));
            }
            if let Some(p) = cm_p {
                finite("cm-p", *p)?;
            }
        }
        Command::Sample { n, bins, .. } => {
            if *n == 0 {
                return Err(CliError::Config("--n must be positive".into()));
            }
            if *bins < 10 {
                return Err(CliError::Config(format!("--bins must be at least 10, got {bins}")));
            }
        }
        Command::Report { samples, m1, m2, .. } => {
            positive("m1", *m1)?;
            positive("m2", *m2)?;
            if *samples < 1000 {
                return Err(CliError::Config(format!("--samples must be at least 1000, got {samples}")));
            }
        }
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    validate(&cli.command)?;
    let path = cli.state.as_ref().ok_or_else(|| CliError::Config("--state is required".into()))?;
    let loaded = load_state(path)?;
    let config = serde_json::to_value(RunConfig { state_path: path.display().to_string(), state: &loaded.file, command: &cli.command })
        .expect("config serializes");
    let ctx = Context { loaded, config, command: &cli.command };
    match &cli.command {
        Command::Marginal => marginal(&ctx),
        Command::Condexp { p, observable } => condexp(&ctx, *p, observable),
        Command::Measure { p, eps, observable } => measure(&ctx, *p, *eps, observable),
        Command::Converge { p, eps_start, halvings, observable, total } => {
            converge(&ctx, *p, *eps_start, *halvings, observable, *total)
        }
        Command::Gaussian { p } => gaussian(&ctx, p),
        Command::Uncertainty { m1, m2, cm_eps, cm_p } => uncertainty(&ctx, *m1, *m2, cm_eps, *cm_p),
        Command::Sample { n, seed, window, observable, bins } => sample_cmd(&ctx, *n, *seed, *window, observable, *bins),
        Command::Report { .. } => crate::report::run(&ctx),
    }
}

fn marginal(ctx: &Context) -> Result<Outcome, CliError> {
    let marg = marginal_total(&density_of(&ctx.loaded.psi));
    let (mean, var) = marg.moments();
    let points = marg.grid.points();
    let rows: Vec<[f64; 2]> = points.iter().zip(&marg.val).map(|(p, v)| [*p, *v]).collect();
    let mut artifacts = Artifacts::default();
    artifacts.add("marginal.csv", csv(&["p", "density"], rows.iter().map(|r| &r[..])));
    let body = json!({
        "grid": marg.grid,
        "mass": marg.mass(),
        "mean": mean,
        "variance": var,
        "max_density": marg.max_value(),
    });
    Ok(ctx.finish(artifacts, "marginal", body))
}

fn condexp(ctx: &Context, p: f64, observable: &Observable1) -> Result<Outcome, CliError> {
    let rho = density_of(&ctx.loaded.psi);
    let cond = Conditioner::new(&rho);
    let result = cond.expectation(observable, p)?;
    let density = cond.density(p)?;
    let (p1, p2) = (cond.predict_p1(p)?, cond.predict_p2(p)?);
    let rows: Vec<[f64; 2]> = density.grid.points().iter().zip(&density.val).map(|(x, v)| [*x, *v]).collect();
    let mut artifacts = Artifacts::default();
    artifacts.add("condexp.csv", csv(&["p1", "conditional_density"], rows.iter().map(|r| &r[..])));
    let body = json!({
        "observable": observable.to_string(),
        "value": result.value,
        "conditioning_p": result.conditioning_p,
        "method": result.method,
        "std_error": result.std_error,
        "predict_p1": p1.value,
        "predict_p2": p2.value,
        "total_density": qpredict_core::grid::interpolate(&cond.marginal().grid, &cond.marginal().val, p),
    });
    Ok(ctx.finish(artifacts, "condexp", body))
}

fn measure(ctx: &Context, p: f64, eps: f64, observable: &Observable1) -> Result<Outcome, CliError> {
    let psi = &ctx.loaded.psi;
    let requested = MeasurementWindow::new(p, eps)?;
    let state = apply_window(psi, &requested)?;
    let marg = marginal_total(&density_of(psi));
    let mean_total = post_expectation_total(&state, &Observable1::Identity);
    let second_total = post_expectation_total(&state, &Observable1::Square);
    let body = json!({
        "requested_window": requested,
        "window": state.window,
        "norm_prob": state.norm_prob,
        "window_probability": window_probability(&marg, &state.window)?,
        "observable": observable.to_string(),
        "post_expectation_p1": post_expectation_p1(&state, observable),
        "post_mean_total": mean_total,
        "post_variance_total": (second_total - mean_total * mean_total).max(0.0),
        "idempotent": projection_idempotence_check(psi, &requested)?,
    });
    Ok(ctx.finish(Artifacts::default(), "measure", body))
}

fn converge(ctx: &Context, p: f64, eps_start: f64, halvings: usize, observable: &Observable1, total: bool) -> Result<Outcome, CliError> {
    let psi = &ctx.loaded.psi;
    let report = if total {
        total_limit_study(psi, p, observable, eps_start, halvings)?
    } else {
        epsilon_limit_study(psi, p, observable, eps_start, halvings)?
    };
    let rows: Vec<[f64; 3]> = report
        .eps_values
        .iter()
        .zip(&report.observable_values)
        .zip(&report.abs_errors)
        .map(|((e, v), a)| [*e, *v, *a])
        .collect();
    let mut artifacts = Artifacts::default();
    artifacts.add("converge.csv", csv(&["eps", "value", "abs_error"], rows.iter().map(|r| &r[..])));
    let body = json!({
        "observable": observable.to_string(),
        "of_total": total,
        "center": report.center,
        "eps_values": report.eps_values,
        "observable_values": report.observable_values,
        "reference": report.reference,
        "abs_errors": report.abs_errors,
        "fitted_order": report.fitted_order,
        "degenerate": report.is_degenerate(),
        "final_error": report.final_error(),
        "sum_grid_spacing": SumLattice::of(psi)?.spacing(),
    });
    Ok(ctx.finish(artifacts, "converge", body))
}

fn gaussian(ctx: &Context, ps: &[f64]) -> Result<Outcome, CliError> {
    let params = ctx.gaussian()?;
    let (mean, var) = total_moments(&params);
    let ps: Vec<f64> = if ps.is_empty() { vec![mean - var.sqrt(), mean, mean + var.sqrt()] } else { ps.to_vec() };
    let predictors: Vec<Value> = ps
        .iter()
        .map(|&p| {
            let a = linear_predictor_p1(&params, p);
            let b = linear_predictor_p2(&params, p);
            json!({"p": p, "predict_p1": a, "predict_p2": b, "sum_is_exact": a + b == p})
        })
        .collect();
    let s = sigma_matrix(&params);
    let body = json!({
        "sigma": s,
        "sigma_inverse": sigma_inverse(&params),
        "sigma_inverse_residual": sigma_inverse_check(&params),
        "determinant": s.determinant(),
        "positive_definite": s.is_positive_definite(),
        "predictors": predictors,
        "conditional_variance_p1": conditional_variance_p1(&params),
        "total_mean": mean,
        "total_variance": var,
    });
    Ok(ctx.finish(Artifacts::default(), "gaussian", body))
}

fn uncertainty(ctx: &Context, m1: f64, m2: f64, cm_eps: &[f64], cm_p: Option<f64>) -> Result<Outcome, CliError> {
    let psi = &ctx.loaded.psi;
    let r = uncertainty_report(psi, m1, m2)?;
    let floor = position::UNCERTAINTY_BOUND;
    let mut artifacts = Artifacts::default();
    let mut body = json!({
        "sd_p1": r.sd_p1,
        "sd_x1": r.sd_x1,
        "sd_p2": r.sd_p2,
        "sd_x2": r.sd_x2,
        "sd_ptotal": r.sd_ptotal,
        "sd_xcm": r.sd_xcm,
        "products": {"x1_p1": r.products.0, "x2_p2": r.products.1, "xcm_ptotal": r.products.2},
        "bound": floor,
        "pass": {
            "x1_p1": r.products.0 >= floor * (1.0 - 1e-3),
            "x2_p2": r.products.1 >= floor * (1.0 - 1e-3),
            "xcm_ptotal": r.products.2 >= floor * (1.0 - 1e-2),
        },
    });
    if !cm_eps.is_empty() {
        let center = cm_p.unwrap_or_else(|| marginal_total(&density_of(psi)).moments().0);
        let rows = cm_variance_vs_epsilon(psi, center, cm_eps, m1, m2)?;
        let table: Vec<[f64; 5]> = rows.iter().map(|r| [r.eps, r.sd_ptotal, r.sd_xcm, r.product, r.norm_prob]).collect();
        artifacts.add("cm_ladder.csv", csv(&["eps", "sd_ptotal", "sd_xcm", "product", "norm_prob"], table.iter().map(|r| &r[..])));
        body["cm_ladder"] = json!({
            "center": center,
            "rows": rows,
            "sd_xcm_increasing": rows.windows(2).all(|w| w[1].sd_xcm > w[0].sd_xcm),
            "sd_ptotal_decreasing": rows.windows(2).all(|w| w[1].sd_ptotal < w[0].sd_ptotal),
        });
    }
    Ok(ctx.finish(artifacts, "uncertainty", body))
}

fn sample_cmd(ctx: &Context, n: usize, seed: u64, window: Option<(f64, f64)>, observable: &Observable1, bins: usize) -> Result<Outcome, CliError> {
    let rho = density_of(&ctx.loaded.psi);
    let source = match ctx.loaded.gaussian {
        Some(params) => SamplingSource::Gaussian(params),
        None => SamplingSource::Grid(&rho),
    };
    let samples = sample(source, n, seed)?;
    let moments = total_momentum_moments(&samples);
    let hist = empirical_total_density(&samples, bins)?;
    let mut artifacts = Artifacts::default();
    let mut body = json!({
        "seed": seed,
        "n": n,
        "source": if ctx.loaded.gaussian.is_some() { "gaussian" } else { "grid" },
        "source_hash": format!("{:016x}", samples.source),
        "observable": observable.to_string(),
        "total_mean": moments.mean,
        "total_variance": moments.variance,
        "total_variance_se": moments.variance_se,
    });
    let kept: Vec<&[f64; 2]> = match window {
        Some((a, b)) => {
            let w = MeasurementWindow::new(0.5 * (a + b), 0.5 * (b - a))?;
            let est = empirical_conditional(&samples, &w, observable)?;
            body["window"] = json!({"lo": a, "hi": b});
            body["mean"] = json!(est.mean);
            body["std_error"] = json!(est.std_error);
            body["n_accepted"] = json!(est.n_accepted);
            samples.points.iter().filter(|p| p[0] + p[1] > a && p[0] + p[1] < b).collect()
        }
        None => {
            let vals: Vec<f64> = samples.points.iter().map(|p| observable.eval(p[0])).collect();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64;
            body["mean"] = json!(mean);
            body["std_error"] = json!((var / n as f64).sqrt());
            body["n_accepted"] = json!(n);
            samples.points.iter().collect()
        }
    };
    artifacts.add("samples.csv", csv(&["p1", "p2"], kept.iter().map(|p| &p[..])));
    let centers = hist.centers();
    let hist_rows: Vec<[f64; 2]> = centers.iter().zip(&hist.density).map(|(c, d)| [*c, *d]).collect();
    artifacts.add("total_histogram.csv", csv(&["p", "density"], hist_rows.iter().map(|r| &r[..])));
    Ok(ctx.finish(artifacts, "sample", body))
}
