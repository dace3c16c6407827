use thiserror::Error;

/// Errors raised by the numerical engine.
///
/// Every variant maps to a stable kebab-case code (see [`Error::code`]) that the
/// command-line front end prints on its diagnostic line.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid range: max {max} must exceed min {min}")]
    InvalidRange { min: f64, max: f64 },

    #[error("invalid point count {0}: need an even count of at least 16")]
    InvalidCount(usize),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("grid misses {missing:.3e} of the probability mass (limit 1e-6)")]
    CoverageTooSmall { missing: f64 },

    #[error("window [{lo}, {hi}] lies outside the grid range [{min}, {max}]")]
    WindowOutOfRange { lo: f64, hi: f64, min: f64, max: f64 },

    #[error("total momentum {p} is outside the reachable range [{min}, {max}]")]
    OutOfRange { p: f64, min: f64, max: f64 },

    #[error("conditioning event has negligible density {density:.3e} (floor {floor:.3e})")]
    NegligibleEvent { density: f64, floor: f64 },

    #[error("window captures probability {prob:.3e}, below 1e-12")]
    ZeroProbabilityWindow { prob: f64 },

    #[error("half-width {eps} spans {cells} sum-grid cells, need at least {required}")]
    WindowResolutionExceeded { eps: f64, cells: usize, required: usize },

    #[error("grid point count {0} is odd; the spectral transform needs an even count")]
    OddGrid(usize),

    #[error("only {accepted} samples accepted, need at least {required}")]
    TooFewAccepted { accepted: usize, required: usize },

    #[error("incompatible grids: {0}")]
    IncompatibleGrids(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidRange { .. } => "invalid-range",
            Error::InvalidCount(_) => "invalid-count",
            Error::InvalidParams(_) => "invalid-params",
            Error::CoverageTooSmall { .. } => "coverage-too-small",
            Error::WindowOutOfRange { .. } => "window-out-of-range",
            Error::OutOfRange { .. } => "out-of-range",
            Error::NegligibleEvent { .. } => "negligible-event",
            Error::ZeroProbabilityWindow { .. } => "zero-probability-window",
            Error::WindowResolutionExceeded { .. } => "window-resolution-exceeded",
            Error::OddGrid(_) => "odd-grid",
            Error::TooFewAccepted { .. } => "too-few-accepted",
            Error::IncompatibleGrids(_) => "incompatible-grids",
            Error::Parse(_) => "parse-error",
            Error::Io { .. } => "io-error",
        }
    }

    /// True for failures caused by the numerics of the request rather than by
    /// malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NegligibleEvent { .. }
                | Error::ZeroProbabilityWindow { .. }
                | Error::WindowResolutionExceeded { .. }
                | Error::CoverageTooSmall { .. }
                | Error::TooFewAccepted { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
