//! Closed-form quantities of the Gaussian-quadratic forecasting model.
//!
//! The state is `θ ~ N(0, 1/t)`. The PM observes `s_P = θ + η` with
//! `η ~ N(0, 1/h)` and acts `a* = -x·H·s_P` where `H = h/(t+h)`. The outcome is
//! `y = θ + a* + ε` with `Var(ε) = τ²`. The forecaster observes `s = θ + δ`
//! with `δ ~ N(0, 1/k)` and pays `C(k)` for precision `k`.
//!
//! Prior mean and PM target are both zero throughout; nothing here takes them as
//! parameters. Everything is a pure function of its arguments.

mod cost;
mod policy;

pub use cost::CostModel;
pub use policy::{PolicySampler, PolicyStrengthDist};

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("domain error: {name} = {value} (requires {requirement})")]
    Domain {
        name: &'static str,
        value: f64,
        requirement: &'static str,
    },
    #[error("invalid policy distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid cost model: {0}")]
    InvalidCost(String),
}

impl ModelError {
    pub(crate) fn domain(name: &'static str, value: f64, requirement: &'static str) -> Self {
        Self::Domain {
            name,
            value,
            requirement,
        }
    }
}

fn positive(name: &'static str, value: f64) -> Result<f64, ModelError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(ModelError::domain(name, value, "finite and > 0"))
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<f64, ModelError> {
    if value >= 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(ModelError::domain(name, value, "finite and >= 0"))
    }
}

/// Information regime of the forecaster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    /// PM intervenes, `s_P` stays private.
    Opaque,
    /// No intervention at all (`a ≡ 0`).
    #[serde(rename = "none")]
    NoIntervention,
    /// PM intervenes and publishes `s_P`.
    Transparent,
}

impl Setting {
    pub const ALL: [Setting; 3] = [Setting::Opaque, Setting::NoIntervention, Setting::Transparent];

    pub fn as_str(&self) -> &'static str {
        match self {
            Setting::Opaque => "opaque",
            Setting::NoIntervention => "none",
            Setting::Transparent => "transparent",
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Setting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "opaque" => Ok(Setting::Opaque),
            "none" => Ok(Setting::NoIntervention),
            "transparent" => Ok(Setting::Transparent),
            other => Err(format!("unknown setting `{other}` (expected opaque, none or transparent)")),
        }
    }
}

/// Exogenous environment: precisions `t` and `h`, outcome noise `τ²`, and the
/// law of the intervention strength `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub prior_precision: f64,
    pub pm_precision: f64,
    #[serde(default)]
    pub outcome_noise_var: f64,
    pub policy: PolicyStrengthDist,
}

impl ModelParams {
    pub fn new(
        prior_precision: f64,
        pm_precision: f64,
        outcome_noise_var: f64,
        policy: PolicyStrengthDist,
    ) -> Result<Self, ModelError> {
        let p = Self {
            prior_precision,
            pm_precision,
            outcome_noise_var,
            policy,
        };
        p.validate()?;
        Ok(p)
    }

    /// Point-mass policy at `mu`, no outcome noise.
    pub fn simple(prior_precision: f64, pm_precision: f64, mu: f64) -> Result<Self, ModelError> {
        Self::new(prior_precision, pm_precision, 0.0, PolicyStrengthDist::point_mass(mu)?)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        positive("prior_precision", self.prior_precision)?;
        positive("pm_precision", self.pm_precision)?;
        non_negative("outcome_noise_var", self.outcome_noise_var)?;
        self.policy.validate()
    }

    pub fn with_prior_precision(mut self, t: f64) -> Result<Self, ModelError> {
        self.prior_precision = t;
        self.validate()?;
        Ok(self)
    }

    pub fn with_pm_precision(mut self, h: f64) -> Result<Self, ModelError> {
        self.pm_precision = h;
        self.validate()?;
        Ok(self)
    }

    pub fn with_policy(mut self, policy: PolicyStrengthDist) -> Result<Self, ModelError> {
        self.policy = policy;
        self.validate()?;
        Ok(self)
    }

    pub fn weights(&self, k: f64) -> Result<PosteriorWeights, ModelError> {
        PosteriorWeights::new(self.prior_precision, self.pm_precision, k)
    }
}

/// Signal weights in the posterior means: `H = h/(t+h)` for the PM and
/// `K = k/(t+k)` for the forecaster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorWeights {
    pub pm: f64,
    pub forecaster: f64,
}

impl PosteriorWeights {
    pub fn new(t: f64, h: f64, k: f64) -> Result<Self, ModelError> {
        Ok(Self {
            pm: pm_weight(t, h)?,
            forecaster: forecaster_weight(t, k)?,
        })
    }
}

/// PM's signal weight `H = h/(t+h)`.
pub fn pm_weight(t: f64, h: f64) -> Result<f64, ModelError> {
    let t = positive("t", t)?;
    let h = positive("h", h)?;
    Ok(h / (t + h))
}

/// Forecaster's signal weight `K = k/(t+k)`; zero when `k = 0`.
pub fn forecaster_weight(t: f64, k: f64) -> Result<f64, ModelError> {
    let t = positive("t", t)?;
    let k = non_negative("k", k)?;
    Ok(k / (t + k))
}

/// PM action `a* = -x·H·s_P`.
#[inline]
pub fn pm_action(x: f64, s_p: f64, pm_weight: f64) -> f64 {
    -x * pm_weight * s_p
}

/// Attenuation factor `R = (1 - μH)²` multiplying the state-driven variance of the
/// outcome.
///
/// `R < 1` exactly when `0 < μ < 2(t+h)/h`, and `R = 0` at `μ = (t+h)/h`.
pub fn attenuation_factor(mu: f64, t: f64, h: f64) -> Result<f64, ModelError> {
    let gap = 1.0 - mu * pm_weight(t, h)?;
    Ok(gap * gap)
}

/// Opaque-setting forecast `f* = E[(1-xH)θ | s] = (1-μH)·K·s`.
///
/// Takes `μ` rather than a draw of `x`: the forecaster never sees the realised
/// strength.
#[inline]
pub fn optimal_forecast_opaque(s: f64, mu: f64, pm_weight: f64, forecaster_weight: f64) -> f64 {
    (1.0 - mu * pm_weight) * forecaster_weight * s
}

/// Transparent-setting forecast `f* = E(θ | s, s_P) - μ·H·s_P`.
pub fn optimal_forecast_transparent(
    s: f64,
    s_p: f64,
    mu: f64,
    params: &ModelParams,
    k: f64,
) -> Result<f64, ModelError> {
    let k = non_negative("k", k)?;
    let (t, h) = (params.prior_precision, params.pm_precision);
    let big_h = pm_weight(t, h)?;
    Ok(transparent_rule(s, s_p, mu, t, h, k, big_h))
}

#[inline]
pub(crate) fn transparent_rule(s: f64, s_p: f64, mu: f64, t: f64, h: f64, k: f64, big_h: f64) -> f64 {
    let posterior_mean = if k > 0.0 {
        (k * s + h * s_p) / (t + h + k)
    } else {
        h * s_p / (t + h)
    };
    posterior_mean - mu * big_h * s_p
}

/// `Var[(1-xH)θ | s]` with `x` independent of `(θ, s)`.
///
/// Writing `V = 1/(t+k)` and `m = K·s` for the posterior variance and mean of θ:
/// `E[(1-xH)²θ² | s] = E[(1-xH)²]·(V + m²)` and `E[(1-xH)θ | s] = (1-μH)·m`,
/// with `E[(1-xH)²] = (1-μH)² + σ²H²`.
pub fn conditional_variance_opaque(
    s: f64,
    k: f64,
    mu: f64,
    sigma2: f64,
    params: &ModelParams,
) -> Result<f64, ModelError> {
    let k = non_negative("k", k)?;
    let sigma2 = non_negative("sigma2", sigma2)?;
    let w = params.weights(k)?;
    let t = params.prior_precision;
    let gap = 1.0 - mu * w.pm;
    let second = gap * gap + sigma2 * w.pm * w.pm;
    let v = 1.0 / (t + k);
    let m = w.forecaster * s;
    Ok(second * (v + m * m) - gap * gap * m * m)
}

/// Interim loss of the opaque forecaster after observing `s`:
/// `Var[(1-xH)θ|s] + H²·E(x²)/h + τ²`.
pub fn interim_loss_opaque(
    s: f64,
    k: f64,
    mu: f64,
    sigma2: f64,
    params: &ModelParams,
) -> Result<f64, ModelError> {
    let cond = conditional_variance_opaque(s, k, mu, sigma2, params)?;
    Ok(cond + policy_noise_term(mu, sigma2, params)? + params.outcome_noise_var)
}

/// `H²·E(x²)·Var(η)`: PM signal noise passed through the policy.
fn policy_noise_term(mu: f64, sigma2: f64, params: &ModelParams) -> Result<f64, ModelError> {
    let big_h = pm_weight(params.prior_precision, params.pm_precision)?;
    Ok(big_h * big_h * (sigma2 + mu * mu) / params.pm_precision)
}

/// Interim loss of the transparent forecaster after observing `s_P`:
/// `1/(t+h+k) + H²·s_P²·σ² + τ²`.
pub fn interim_loss_transparent(
    s_p: f64,
    k: f64,
    sigma2: f64,
    params: &ModelParams,
) -> Result<f64, ModelError> {
    let k = non_negative("k", k)?;
    let sigma2 = non_negative("sigma2", sigma2)?;
    let (t, h) = (params.prior_precision, params.pm_precision);
    let big_h = pm_weight(t, h)?;
    Ok(1.0 / (t + h + k) + big_h * big_h * s_p * s_p * sigma2 + params.outcome_noise_var)
}

/// Full ex-ante MSE of the opaque forecaster, all constants included:
/// `H²σ²/t + R/(t+k) + H²E(x²)/h + τ²`.
pub fn exante_expected_loss(k: f64, mu: f64, sigma2: f64, params: &ModelParams) -> Result<f64, ModelError> {
    let k = non_negative("k", k)?;
    let sigma2 = non_negative("sigma2", sigma2)?;
    let (t, h) = (params.prior_precision, params.pm_precision);
    let big_h = pm_weight(t, h)?;
    let r = attenuation_factor(mu, t, h)?;
    Ok(big_h * big_h * sigma2 / t
        + r / (t + k)
        + policy_noise_term(mu, sigma2, params)?
        + params.outcome_noise_var)
}

/// Expected realised MSE `E[(y - f*)²]` in any setting, constants included.
///
/// Under transparency the `H²·s_P²·σ²` term is averaged over `s_P`, whose second
/// moment is `1/t + 1/h`.
pub fn expected_mse(
    k: f64,
    setting: Setting,
    mu: f64,
    sigma2: f64,
    params: &ModelParams,
) -> Result<f64, ModelError> {
    let k = non_negative("k", k)?;
    let sigma2 = non_negative("sigma2", sigma2)?;
    let (t, h) = (params.prior_precision, params.pm_precision);
    match setting {
        Setting::Opaque => exante_expected_loss(k, mu, sigma2, params),
        Setting::NoIntervention => Ok(1.0 / (t + k) + params.outcome_noise_var),
        Setting::Transparent => {
            let big_h = pm_weight(t, h)?;
            let sp_second_moment = 1.0 / t + 1.0 / h;
            Ok(1.0 / (t + h + k) + big_h * big_h * sigma2 * sp_second_moment + params.outcome_noise_var)
        }
    }
}

/// k-dependent expected loss of the decision problem (constants dropped):
/// `R/(t+k)`, `1/(t+k)` or `1/(t+h+k)`. This is `-g(k)`.
pub fn decision_loss(k: f64, setting: Setting, mu: f64, params: &ModelParams) -> Result<f64, ModelError> {
    let k = non_negative("k", k)?;
    let (t, h) = (params.prior_precision, params.pm_precision);
    Ok(match setting {
        Setting::Opaque => attenuation_factor(mu, t, h)? / (t + k),
        Setting::NoIntervention => 1.0 / (positive("t", t)? + k),
        Setting::Transparent => 1.0 / (positive("t", t)? + positive("h", h)? + k),
    })
}

/// Ex-ante objective minimised over `k`: decision loss plus `C(k)`.
pub fn exante_objective(
    k: f64,
    setting: Setting,
    mu: f64,
    params: &ModelParams,
    cost: &CostModel,
) -> Result<f64, ModelError> {
    Ok(decision_loss(k, setting, mu, params)? + cost.value(k))
}

/// Marginal benefit of precision `∂g/∂k`: `R/(t+k)²`, `1/(t+k)²` or
/// `1/(t+h+k)²`.
pub fn marginal_benefit(k: f64, setting: Setting, mu: f64, params: &ModelParams) -> Result<f64, ModelError> {
    let k = non_negative("k", k)?;
    let (t, h) = (params.prior_precision, params.pm_precision);
    Ok(match setting {
        Setting::Opaque => {
            let d = t + k;
            attenuation_factor(mu, t, h)? / (d * d)
        }
        Setting::NoIntervention => {
            let d = positive("t", t)? + k;
            1.0 / (d * d)
        }
        Setting::Transparent => {
            let d = positive("t", t)? + positive("h", h)? + k;
            1.0 / (d * d)
        }
    })
}

/// Regime of the PM's average response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `μ < 0`
    Reinforcing,
    /// `0 < μ < (t+h)/h`
    Preventive,
    /// `μ > (t+h)/h`
    Overreacting,
    /// `μ = 0` or `μ = (t+h)/h`
    Boundary,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Reinforcing => "reinforcing",
            Regime::Preventive => "preventive",
            Regime::Overreacting => "overreacting",
            Regime::Boundary => "boundary",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `(t+h)/h`, the strength at which the PM offsets the expected state exactly.
pub fn full_offset_strength(t: f64, h: f64) -> Result<f64, ModelError> {
    let t = positive("t", t)?;
    let h = positive("h", h)?;
    Ok((t + h) / h)
}

pub fn classify_regime(mu: f64, t: f64, h: f64) -> Result<Regime, ModelError> {
    let offset = full_offset_strength(t, h)?;
    Ok(if mu < 0.0 {
        Regime::Reinforcing
    } else if mu > 0.0 && mu < offset {
        Regime::Preventive
    } else if mu > offset {
        Regime::Overreacting
    } else {
        Regime::Boundary
    })
}
