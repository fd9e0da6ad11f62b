//! Monte-Carlo simulation of the data-generating process.
//!
//! Each sample draws `x, θ, η, δ, ε` in that order, forms `s_P = θ + η`,
//! `s = θ + δ`, the PM action and the outcome, then scores the setting's optimal
//! forecast. Samples are processed in fixed blocks; block `b` always uses
//! substream `b` of the seed, and block statistics are merged in block order, so
//! the estimate does not depend on the number of threads.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{self, ModelError, ModelParams, PolicySampler, PolicyStrengthDist, Setting};
use crate::rng;

pub const MIN_SAMPLES: u64 = 10_000;
const BLOCK: u64 = 1 << 14;
const POLICY_STREAM: u64 = u64::MAX - 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("n_samples must be at least {MIN_SAMPLES}, got {0}")]
    TooFewSamples(u64),
    #[error("total-variance check needs the opaque setting, got {0}")]
    WrongSetting(Setting),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_samples: u64,
    pub seed: u64,
    pub k: f64,
    pub setting: Setting,
    pub params: ModelParams,
    /// Mean strength used by the forecast rule. The rule never sees the drawn `x`.
    pub mu: f64,
}

impl SimConfig {
    /// Forecast rule uses the mean of `params.policy`.
    pub fn new(params: ModelParams, setting: Setting, k: f64, n_samples: u64, seed: u64) -> Self {
        Self {
            n_samples,
            seed,
            k,
            setting,
            mu: params.policy.mean(),
            params,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_samples < MIN_SAMPLES {
            return Err(SimError::TooFewSamples(self.n_samples));
        }
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return Err(ModelError::Domain {
                name: "k",
                value: self.k,
                requirement: "finite and >= 0",
            }
            .into());
        }
        if !self.mu.is_finite() {
            return Err(ModelError::Domain {
                name: "mu",
                value: self.mu,
                requirement: "finite",
            }
            .into());
        }
        self.params.validate()?;
        Ok(())
    }

    /// Closed-form expected MSE of the configured rule.
    pub fn closed_form_mse(&self) -> Result<f64, ModelError> {
        model::expected_mse(self.k, self.setting, self.mu, self.params.policy.variance(), &self.params)
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: u64,
}

impl Estimate {
    /// `(mean - reference) / std_error`; zero-variance estimates give `0` on an
    /// exact match and `±inf` otherwise.
    pub fn z_score(&self, reference: f64) -> f64 {
        let diff = self.mean - reference;
        if self.std_error > 0.0 {
            diff / self.std_error
        } else if diff.abs() <= 1e-12 * reference.abs().max(1.0) {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        }
    }
}

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    #[inline]
    fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        Moments {
            n,
            mean: self.mean + d * w,
            m2: self.m2 + other.m2 + d * d * self.n as f64 * w,
        }
    }

    fn estimate(&self) -> Estimate {
        let var = if self.n > 1 { self.m2 / (self.n - 1) as f64 } else { 0.0 };
        Estimate {
            mean: self.mean,
            std_error: (var / self.n as f64).sqrt(),
            n: self.n,
        }
    }
}

/// Runs `kernel` once per sample and returns the moments of each of its `M`
/// outputs. Deterministic in `(n, seed)`.
fn accumulate<const M: usize, F>(n: u64, seed: u64, kernel: F) -> [Moments; M]
where
    F: Fn(&mut ChaCha8Rng) -> [f64; M] + Sync,
{
    let blocks = n.div_ceil(BLOCK);
    let partial: Vec<[Moments; M]> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::substream(seed, b);
            let len = BLOCK.min(n - b * BLOCK);
            let mut acc = [Moments::default(); M];
            for _ in 0..len {
                let out = kernel(&mut r);
                for (a, v) in acc.iter_mut().zip(out) {
                    a.push(v);
                }
            }
            acc
        })
        .collect();
    partial.into_iter().fold([Moments::default(); M], |mut total, block| {
        for (t, b) in total.iter_mut().zip(block) {
            *t = t.merge(b);
        }
        total
    })
}

/// One realisation of the primitives.
#[derive(Debug, Clone, Copy)]
struct Draw {
    x: f64,
    theta: f64,
    s_p: f64,
    s: f64,
    eps: f64,
}

#[derive(Debug, Clone, Copy)]
struct Dgp {
    policy: PolicySampler,
    sd_theta: f64,
    sd_eta: f64,
    sd_delta: Option<f64>,
    sd_eps: f64,
}

impl Dgp {
    fn new(params: &ModelParams, k: f64) -> Self {
        Self {
            policy: params.policy.sampler(),
            sd_theta: params.prior_precision.recip().sqrt(),
            sd_eta: params.pm_precision.recip().sqrt(),
            sd_delta: (k > 0.0).then(|| k.recip().sqrt()),
            sd_eps: params.outcome_noise_var.sqrt(),
        }
    }

    #[inline]
    fn draw(&self, r: &mut ChaCha8Rng) -> Draw {
        let x = self.policy.draw(r);
        let theta = self.sd_theta * rng::standard_normal(r);
        let eta = self.sd_eta * rng::standard_normal(r);
        let z_delta = rng::standard_normal(r);
        let eps = self.sd_eps * rng::standard_normal(r);
        // k = 0 carries no information; K = 0 makes the value of s irrelevant.
        let s = self.sd_delta.map_or(0.0, |sd| theta + sd * z_delta);
        Draw {
            x,
            theta,
            s_p: theta + eta,
            s,
            eps,
        }
    }
}

/// Realised MSE of the optimal forecast rule.
pub fn simulate_mse(config: &SimConfig) -> Result<Estimate, SimError> {
    simulate_mse_scaled(config, 1.0)
}

/// Realised MSE when the optimal forecast is multiplied by `slope_scale`.
///
/// Every rule here is linear in the signals with no intercept, so scaling the
/// forecast scales all of its slope coefficients. Any `slope_scale != 1` should
/// do strictly worse.
pub fn simulate_mse_scaled(config: &SimConfig, slope_scale: f64) -> Result<Estimate, SimError> {
    config.validate()?;
    let params = &config.params;
    let (t, h, k, mu) = (params.prior_precision, params.pm_precision, config.k, config.mu);
    let weights = params.weights(k)?;
    let (big_h, big_k) = (weights.pm, weights.forecaster);
    let dgp = Dgp::new(params, k);
    let setting = config.setting;
    let [m] = accumulate(config.n_samples, config.seed, |r| {
        let d = dgp.draw(r);
        let (action, forecast) = match setting {
            Setting::NoIntervention => (0.0, big_k * d.s),
            Setting::Opaque => (
                model::pm_action(d.x, d.s_p, big_h),
                model::optimal_forecast_opaque(d.s, mu, big_h, big_k),
            ),
            Setting::Transparent => (
                model::pm_action(d.x, d.s_p, big_h),
                model::transparent_rule(d.s, d.s_p, mu, t, h, k, big_h),
            ),
        };
        let y = d.theta + action + d.eps;
        let err = y - slope_scale * forecast;
        [err * err]
    });
    Ok(m.estimate())
}

/// Simulated MSE next to its closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseComparison {
    pub estimate: Estimate,
    pub closed_form: f64,
    pub z_score: f64,
}

pub fn compare_mse(config: &SimConfig) -> Result<MseComparison, SimError> {
    let estimate = simulate_mse(config)?;
    let closed_form = config.closed_form_mse()?;
    Ok(MseComparison {
        estimate,
        closed_form,
        z_score: estimate.z_score(closed_form),
    })
}

pub const Z_LIMIT: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermCheck {
    pub estimate: Estimate,
    pub closed_form: f64,
    pub z_score: f64,
}

impl TermCheck {
    fn new(estimate: Estimate, closed_form: f64) -> Self {
        Self {
            estimate,
            closed_form,
            z_score: estimate.z_score(closed_form),
        }
    }

    pub fn passed(&self) -> bool {
        self.z_score.abs() <= Z_LIMIT
    }
}

/// Simulated law-of-total-variance decomposition of `Z = (1 - xH)θ` given `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TotalVarianceReport {
    /// `Var(Z)` against `H²σ²/t + (1-μH)²/t`.
    pub total: TermCheck,
    /// `Var(E[Z|s])` against `(1/t)(1-μH)²·k/(t+k)`.
    pub explained: TermCheck,
    /// `E[Var(Z|s)]` against `H²σ²/t + (1-μH)²/(t+k)`.
    pub residual: TermCheck,
    /// Sample mean of `Z² - E[Z|s]² - Var(Z|s)`, which must vanish.
    pub identity_gap: TermCheck,
    pub passed: bool,
}

/// Estimates the three terms of the decomposition by simulation and checks each
/// against its closed form, and the identity itself, at 4 standard errors.
///
/// `E[Z] = E[E[Z|s]] = 0` because the prior mean is zero, so second moments are
/// variances and no centring is needed.
pub fn verify_total_variance(config: &SimConfig) -> Result<TotalVarianceReport, SimError> {
    config.validate()?;
    if config.setting != Setting::Opaque {
        return Err(SimError::WrongSetting(config.setting));
    }
    let params = config.params;
    let (t, k, mu) = (params.prior_precision, config.k, config.mu);
    let sigma2 = params.policy.variance();
    let w = params.weights(k)?;
    let big_h = w.pm;
    let dgp = Dgp::new(&params, k);
    let [z2, e2, cv, gap] = accumulate(config.n_samples, config.seed, |r| {
        let d = dgp.draw(r);
        let z = (1.0 - d.x * big_h) * d.theta;
        let cond_mean = model::optimal_forecast_opaque(d.s, mu, big_h, w.forecaster);
        let cond_var = model::conditional_variance_opaque(d.s, k, mu, sigma2, &params)
            .expect("validated parameters");
        let z2 = z * z;
        let e2 = cond_mean * cond_mean;
        [z2, e2, cond_var, z2 - e2 - cond_var]
    });
    let r = model::attenuation_factor(mu, t, params.pm_precision)?;
    let policy_var = big_h * big_h * sigma2 / t;
    let total = TermCheck::new(z2.estimate(), policy_var + r / t);
    let explained = TermCheck::new(e2.estimate(), r * k / (t * (t + k)));
    let residual = TermCheck::new(cv.estimate(), policy_var + r / (t + k));
    let identity_gap = TermCheck::new(gap.estimate(), 0.0);
    let passed = [total, explained, residual, identity_gap].iter().all(TermCheck::passed);
    Ok(TotalVarianceReport {
        total,
        explained,
        residual,
        identity_gap,
        passed,
    })
}

/// `n` i.i.d. draws of the intervention strength.
pub fn sample_policy(dist: &PolicyStrengthDist, n: usize, seed: u64) -> Vec<f64> {
    let sampler = dist.sampler();
    let mut r = rng::substream(seed, POLICY_STREAM);
    (0..n).map(|_| sampler.draw(&mut r)).collect()
}
