//! Optimal precision `k* = argmin_{k ≥ 0} loss(k) + C(k)`.
//!
//! The objective is convex, so `k*` is found from the first-order condition
//! `MB(k) = C′(k)`. `MB` is strictly decreasing whenever it is positive and `C′`
//! is non-decreasing, so one sign change brackets the root and bisection converges
//! from any start.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

use crate::model::{self, CostModel, ModelError, ModelParams, Setting};

pub const DEFAULT_TOL: f64 = 1e-10;
/// Bracket expansion gives up past this precision.
pub const BRACKET_CAP: f64 = 1e12;
const MAX_BISECTIONS: u32 = 400;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("tolerance {0} outside (0, 1e-3]")]
    InvalidTolerance(f64),
    #[error("invalid cost: marginal cost {marginal} <= 0 at k = {k}")]
    InvalidCost { k: f64, marginal: f64 },
    #[error("no sign change of MB - C′ below k = {upper:e}")]
    NoBracket { upper: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionKind {
    Interior,
    Corner,
}

impl SolutionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolutionKind::Interior => "interior",
            SolutionKind::Corner => "corner",
        }
    }
}

impl fmt::Display for SolutionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub k_star: f64,
    /// `exante_objective(k_star)`, recomputed.
    pub objective_value: f64,
    pub solution_kind: SolutionKind,
    /// `|MB(k*) - C′(k*)|` when interior, `MB(0) - C′(0⁺)` (≤ 0) at a corner.
    pub first_order_residual: f64,
    pub iterations: u32,
    pub setting: Setting,
}

impl SolveResult {
    #[allow(clippy::too_many_arguments)]
    fn build(
        k_star: f64,
        kind: SolutionKind,
        residual: f64,
        iterations: u32,
        setting: Setting,
        mu: f64,
        params: &ModelParams,
        cost: &CostModel,
    ) -> Result<Self, ModelError> {
        Ok(Self {
            k_star,
            objective_value: model::exante_objective(k_star, setting, mu, params, cost)?,
            solution_kind: kind,
            first_order_residual: residual,
            iterations,
            setting,
        })
    }
}

/// Global minimiser of the ex-ante objective on `[0, ∞)`.
///
/// Returns a corner at zero when `MB(0) ≤ C′(0⁺)`. Otherwise doubles an upper
/// bound from `k = 1` until `MB - C′` turns non-positive, then bisects until
/// both the residual `|MB - C′| ≤ tol·max(1, C′)` and the bracket width
/// `≤ tol·max(1, k)` hold.
pub fn solve(
    setting: Setting,
    mu: f64,
    params: &ModelParams,
    cost: &CostModel,
    tol: f64,
) -> Result<SolveResult, SolveError> {
    if !(tol > 0.0 && tol <= 1e-3) {
        return Err(SolveError::InvalidTolerance(tol));
    }
    params.validate()?;
    cost.validate()?;
    let mb = |k: f64| model::marginal_benefit(k, setting, mu, params);

    let mb0 = mb(0.0)?;
    let mc0 = cost.marginal_at_zero();
    if mb0 <= mc0 {
        return Ok(SolveResult::build(0.0, SolutionKind::Corner, mb0 - mc0, 0, setting, mu, params, cost)?);
    }

    let foc = |k: f64| -> Result<f64, SolveError> {
        let marginal = cost.marginal(k);
        if !(marginal > 0.0) {
            return Err(SolveError::InvalidCost { k, marginal });
        }
        Ok(mb(k)? - marginal)
    };

    let mut iterations = 0;
    let mut lo = 0.0;
    let mut hi = 1.0;
    while foc(hi)? > 0.0 {
        lo = hi;
        hi *= 2.0;
        iterations += 1;
        if hi > BRACKET_CAP {
            return Err(SolveError::NoBracket { upper: hi });
        }
    }

    // Invariant: foc(lo) > 0 >= foc(hi), with foc(0) read as MB(0) - C′(0⁺).
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..MAX_BISECTIONS {
        mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let g = foc(mid)?;
        let width_ok = hi - lo <= tol * mid.max(1.0);
        if width_ok && g.abs() <= tol * cost.marginal(mid).max(1.0) {
            break;
        }
        if g > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let residual = (mb(mid)? - cost.marginal(mid)).abs();
    Ok(SolveResult::build(mid, SolutionKind::Interior, residual, iterations, setting, mu, params, cost)?)
}

/// Analytic minimiser for linear cost `C(k) = c·k`:
/// `max(0, √R/√c - t)`, `max(0, 1/√c - t)` or `max(0, 1/√c - t - h)`.
pub fn closed_form_linear_cost(
    setting: Setting,
    mu: f64,
    params: &ModelParams,
    c: f64,
) -> Result<SolveResult, SolveError> {
    let cost = CostModel::linear(c)?;
    params.validate()?;
    let (t, h) = (params.prior_precision, params.pm_precision);
    let root_c = c.sqrt();
    let unconstrained = match setting {
        Setting::Opaque => model::attenuation_factor(mu, t, h)?.sqrt() / root_c - t,
        Setting::NoIntervention => 1.0 / root_c - t,
        Setting::Transparent => 1.0 / root_c - t - h,
    };
    if unconstrained > 0.0 {
        let residual = (model::marginal_benefit(unconstrained, setting, mu, params)? - c).abs();
        Ok(SolveResult::build(
            unconstrained,
            SolutionKind::Interior,
            residual,
            0,
            setting,
            mu,
            params,
            &cost,
        )?)
    } else {
        let residual = model::marginal_benefit(0.0, setting, mu, params)? - c;
        Ok(SolveResult::build(0.0, SolutionKind::Corner, residual, 0, setting, mu, params, &cost)?)
    }
}

/// Default grid extent for [`grid_oracle`]: `10·(t+h) + 100`.
pub fn default_grid_extent(params: &ModelParams) -> f64 {
    10.0 * (params.prior_precision + params.pm_precision) + 100.0
}

/// Brute-force argmin of the objective over `n_points` evenly spaced values of
/// `[0, k_max]`. Shares nothing with [`solve`] beyond the objective itself.
pub fn grid_oracle(
    setting: Setting,
    mu: f64,
    params: &ModelParams,
    cost: &CostModel,
    k_max: f64,
    n_points: usize,
) -> Result<SolveResult, SolveError> {
    assert!(n_points >= 2, "grid needs at least two points");
    let step = k_max / (n_points - 1) as f64;
    let mut best = (0usize, f64::INFINITY);
    for i in 0..n_points {
        let k = i as f64 * step;
        let v = model::exante_objective(k, setting, mu, params, cost)?;
        if v < best.1 {
            best = (i, v);
        }
    }
    let k_star = best.0 as f64 * step;
    let kind = if best.0 == 0 {
        SolutionKind::Corner
    } else {
        SolutionKind::Interior
    };
    let residual = model::marginal_benefit(k_star, setting, mu, params)?
        - if k_star == 0.0 {
            cost.marginal_at_zero()
        } else {
            cost.marginal(k_star)
        };
    Ok(SolveResult {
        k_star,
        objective_value: best.1,
        solution_kind: kind,
        first_order_residual: residual,
        iterations: n_points as u32,
        setting,
    })
}

/// Grid spacing used by [`grid_oracle`].
pub fn grid_step(k_max: f64, n_points: usize) -> f64 {
    k_max / (n_points - 1) as f64
}
