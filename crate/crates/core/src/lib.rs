//! Predictive analysis of a two-particle momentum state.
//!
//! The crate computes the distribution of the total momentum `P = p1 + p2`,
//! conditional densities and expectations of `p1` given a measured `P`,
//! simulates windowed projection measurements of `P` and checks that they
//! converge to the conditional expectations, and verifies uncertainty
//! products in the coordinate representation. Units have `ħ = 1`.
//!
//! ```no_run
//! use qpredict_core::{gaussian_wavefunction, density_of, predict_p1, GaussianParams};
//!
//! let params = GaussianParams::new(2.0, 4.0, 1.0, 0.3)?;
//! let (g1, g2) = params.default_grids();
//! let rho = density_of(&gaussian_wavefunction(params, g1, g2)?);
//! let prediction = predict_p1(&rho, 10.0)?;
//! assert!((prediction.value - 4.0).abs() < 1e-3);
//! # Ok::<(), qpredict_core::Error>(())
//! ```

pub mod conditional;
pub mod convergence;
pub mod error;
pub mod gaussian;
pub mod grid;
pub mod measurement;
pub mod montecarlo;
pub mod observable;
pub mod position;
pub mod state;
pub mod statefile;

pub use conditional::{
    conditional_density, conditional_expectation, marginal_total, predict_p1, predict_p2, sum_grid, tower_check,
    window_probability, ConditionalDensity, Conditioner, Method, PredictionResult,
};
pub use convergence::fit_order;
pub use error::{Error, Result};
pub use gaussian::{
    conditional_variance_p1, linear_predictor_p1, linear_predictor_p2, sigma_inverse, sigma_inverse_check, sigma_matrix,
    total_moments, CovarianceMatrix,
};
pub use grid::{make_grid, GridSpec};
pub use measurement::{
    apply_window, epsilon_limit_study, post_expectation_p1, post_expectation_total, projection_idempotence_check,
    total_limit_study, ConvergenceReport, MeasurementWindow, PostMeasurementState, SumLattice,
};
pub use montecarlo::{
    empirical_conditional, empirical_total_density, sample, total_momentum_moments, EmpiricalEstimate, Histogram,
    SampleSet, SamplingSource,
};
pub use observable::{Observable1, Observable2};
pub use position::{cm_variance_vs_epsilon, to_position, uncertainty_report, CmRow, PositionState, UncertaintyReport};
pub use state::{
    density_of, expectation, gaussian_wavefunction, mixture_wavefunction, mse_at, variance, Density1, Density2,
    GaussianParams, WaveFunction2,
};
pub use statefile::{load_state, LoadedState, StateFile};
