//! `qpredict`: reproducible experiments on two-particle momentum states.
//!
//! Every command reads a state file (`--state`), writes its artifacts into
//! `--out` and prints its JSON summary on stdout. Failures print one JSON line
//! on stderr and exit with 2 (invalid input), 3 (numerical) or 4 (I/O).

mod commands;
mod output;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qpredict_core::Observable1;
use serde::{Serialize, Serializer};

#[derive(Debug, Parser)]
#[command(name = "qpredict", version, about = "Conditional predictions and measurement simulations for two-particle momentum states")]
pub struct Cli {
    /// State file (JSON, kind "gaussian" or "grid").
    #[arg(long, global = true)]
    pub state: Option<PathBuf>,

    /// Directory receiving the artifacts.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

fn observable_spec<S: Serializer>(o: &Observable1, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(o)
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    /// Density of the total momentum p1 + p2.
    Marginal,
    /// Conditional expectation of an observable of p1 given the total momentum.
    Condexp {
        #[arg(long, allow_negative_numbers = true)]
        p: f64,
        #[arg(long, default_value = "p1")]
        #[serde(serialize_with = "observable_spec")]
        observable: Observable1,
    },
    /// Projection onto a window of total momenta.
    Measure {
        #[arg(long, allow_negative_numbers = true)]
        p: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value = "p1")]
        #[serde(serialize_with = "observable_spec")]
        observable: Observable1,
    },
    /// Shrinking-window study against the conditional expectation.
    Converge {
        #[arg(long, allow_negative_numbers = true)]
        p: f64,
        #[arg(long, default_value_t = 1.0)]
        eps_start: f64,
        #[arg(long, default_value_t = 6)]
        halvings: usize,
        #[arg(long, default_value = "p1")]
        #[serde(serialize_with = "observable_spec")]
        observable: Observable1,
        /// Study the observable as a function of the total momentum instead.
        #[arg(long)]
        total: bool,
    },
    /// Closed-form results for a Gaussian state.
    Gaussian {
        /// Total momenta for the predictors (comma separated).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        p: Vec<f64>,
    },
    /// Standard deviations and uncertainty products in both representations.
    Uncertainty {
        #[arg(long, default_value_t = 1.0)]
        m1: f64,
        #[arg(long, default_value_t = 1.0)]
        m2: f64,
        /// Half-widths for the center-of-mass ladder (comma separated, decreasing).
        #[arg(long, value_delimiter = ',')]
        cm_eps: Vec<f64>,
        /// Window center for the ladder; defaults to the mean total momentum.
        #[arg(long, allow_negative_numbers = true)]
        cm_p: Option<f64>,
    },
    /// Monte Carlo samples of (p1, p2), optionally post-selected on a window.
    Sample {
        #[arg(long, default_value_t = 1_000_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Open interval `a:b` of total momenta to post-select on.
        #[arg(long, value_parser = parse_window, allow_hyphen_values = true)]
        window: Option<(f64, f64)>,
        #[arg(long, default_value = "p1")]
        #[serde(serialize_with = "observable_spec")]
        observable: Observable1,
        #[arg(long, default_value_t = 50)]
        bins: usize,
    },
    /// End-to-end walkthrough for a Gaussian state with pass/fail sections.
    Report {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 1.0)]
        m1: f64,
        #[arg(long, default_value_t = 1.0)]
        m2: f64,
    },
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("window `{s}` is not of the form a:b"))?;
    let a: f64 = a.trim().parse().map_err(|_| format!("bad window bound `{a}`"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("bad window bound `{b}`"))?;
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(format!("window needs finite a < b, got {a}:{b}"));
    }
    Ok((a, b))
}

#[derive(Debug)]
pub enum CliError {
    Core(qpredict_core::Error),
    Config(String),
    Io { path: PathBuf, source: std::io::Error },
}

impl From<qpredict_core::Error> for CliError {
    fn from(e: qpredict_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Config(_) => "invalid-config",
            CliError::Io { .. } => "io-error",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(qpredict_core::Error::Io { .. }) | CliError::Io { .. } => 4,
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Core(e) => e.to_string(),
            CliError::Config(m) => m.clone(),
            CliError::Io { path, source } => format!("{}: {source}", path.display()),
        }
    }
}

fn fail(e: &CliError) -> ExitCode {
    let line = serde_json::json!({"error": e.code(), "exit": e.exit_code(), "message": e.message()});
    eprintln!("{line}");
    ExitCode::from(e.exit_code())
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("QPREDICT_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Config(format!("QPREDICT_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            return fail(&CliError::Config(first.to_string()));
        }
    };
    if let Err(e) = configure_threads() {
        return fail(&e);
    }
    let outcome = match commands::run(&cli) {
        Ok(o) => o,
        Err(e) => return fail(&e),
    };
    if let Err((path, source)) = outcome.artifacts.commit(&cli.out) {
        return fail(&CliError::Io { path, source });
    }
    print!("{}", String::from_utf8_lossy(&outcome.summary));
    ExitCode::SUCCESS
}
