//! Numerical laboratory for a forecaster choosing how much private information to
//! buy when the forecasted outcome is subject to policy intervention.
//!
//! - [`model`]: closed-form weights, forecasts, losses, marginal benefits, regimes.
//! - [`solver`]: optimal precision `k*` with exact corner detection.
//! - [`statics`]: parameter sweeps and sign certification of `k*`.
//! - [`montecarlo`]: simulation of the data-generating process.
//! - [`scenario`] and [`output`]: scenario files and deterministic CSV/JSON output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod model;
pub mod montecarlo;
pub mod output;
pub mod rng;
pub mod scenario;
pub mod solver;
pub mod statics;

pub use model::{
    attenuation_factor, classify_regime, exante_expected_loss, exante_objective, expected_mse,
    interim_loss_opaque, interim_loss_transparent, marginal_benefit, optimal_forecast_opaque,
    optimal_forecast_transparent, pm_action, pm_weight, CostModel, ModelError, ModelParams,
    PolicyStrengthDist, PosteriorWeights, Regime, Setting,
};
pub use montecarlo::{simulate_mse, Estimate, SimConfig, SimError};
pub use scenario::{Scenario, ScenarioError};
pub use solver::{closed_form_linear_cost, grid_oracle, solve, SolutionKind, SolveError, SolveResult};
pub use statics::{sweep, SweepSpec, SweepTable};
