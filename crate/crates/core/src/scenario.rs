//! Scenario files.
//!
//! A scenario is a JSON object. Unknown keys anywhere are rejected. Either
//! `params.policy` or the top-level shorthand `mu` (a point mass) must be given,
//! not both.
//!
//! ```json
//! {
//!   "name": "corner-example",
//!   "params": { "prior_precision": 1, "pm_precision": 1, "outcome_noise_var": 0 },
//!   "mu": 1,
//!   "cost": { "kind": "linear", "c": 0.5 },
//!   "settings": ["none", "opaque"],
//!   "sweep": { "parameter": "sigma2", "grid": [0, 0.25, 1] },
//!   "simulate": { "n_samples": 1000000, "seed": 7 },
//!   "certify": { "checks": ["corollary1"], "n_random": 500 }
//! }
//! ```

use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

use crate::model::{CostModel, ModelParams, PolicyStrengthDist, Setting};
use crate::solver::DEFAULT_TOL;
use crate::statics::{ParamBox, SweepSpec, SweptParameter};

pub const DEFAULT_SEED: u64 = 20_240_917;
pub const DEFAULT_SIM_SAMPLES: u64 = 1_000_000;
pub const DEFAULT_CERTIFY_POINTS: usize = 500;
pub const DEFAULT_SEARCH_SIZE: usize = 2000;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
}

impl From<serde_json::Error> for ScenarioError {
    fn from(e: serde_json::Error) -> Self {
        let message = e.to_string();
        // serde_json appends " at line L column C"; keep the message bare.
        let message = match message.rfind(" at line ") {
            Some(i) => message[..i].to_string(),
            None => message,
        };
        ScenarioError::Parse {
            line: e.line(),
            column: e.column(),
            message,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertifyCheck {
    Proposition1,
    Corollary1,
    Proposition3,
}

impl CertifyCheck {
    pub const ALL: [CertifyCheck; 3] = [
        CertifyCheck::Proposition1,
        CertifyCheck::Corollary1,
        CertifyCheck::Proposition3,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CertifyCheck::Proposition1 => "proposition1",
            CertifyCheck::Corollary1 => "corollary1",
            CertifyCheck::Proposition3 => "proposition3",
        }
    }
}

impl std::str::FromStr for CertifyCheck {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CertifyCheck::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown check `{s}` (expected proposition1, corollary1 or proposition3)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveBlock {
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl Default for SolveBlock {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL }
    }
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepBlock {
    pub parameter: SweptParameter,
    pub grid: Vec<f64>,
}

/// File form of a sweep: an explicit `grid`, or `start`/`stop`/`steps`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    parameter: SweptParameter,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    steps: Option<usize>,
}

impl TryFrom<SweepFile> for SweepBlock {
    type Error = String;

    fn try_from(f: SweepFile) -> Result<Self, String> {
        let grid = match (f.grid, f.start, f.stop, f.steps) {
            (Some(grid), None, None, None) => grid,
            (None, Some(start), Some(stop), Some(steps)) => {
                if steps < 2 {
                    return Err("sweep.steps must be at least 2".into());
                }
                let span = stop - start;
                (0..steps)
                    .map(|i| if i + 1 == steps { stop } else { start + span * i as f64 / (steps - 1) as f64 })
                    .collect()
            }
            _ => return Err("sweep needs either `grid` or all of `start`, `stop`, `steps`".into()),
        };
        Ok(SweepBlock {
            parameter: f.parameter,
            grid,
        })
    }
}

impl From<SweepBlock> for SweepFile {
    fn from(b: SweepBlock) -> Self {
        SweepFile {
            parameter: b.parameter,
            grid: Some(b.grid),
            start: None,
            stop: None,
            steps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateBlock {
    #[serde(default = "default_sim_samples")]
    pub n_samples: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Precision to simulate at; each setting's `k*` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
}

impl Default for SimulateBlock {
    fn default() -> Self {
        Self {
            n_samples: DEFAULT_SIM_SAMPLES,
            seed: DEFAULT_SEED,
            k: None,
        }
    }
}

fn default_sim_samples() -> u64 {
    DEFAULT_SIM_SAMPLES
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_checks() -> Vec<CertifyCheck> {
    CertifyCheck::ALL.to_vec()
}

fn default_certify_points() -> usize {
    DEFAULT_CERTIFY_POINTS
}

fn default_search_size() -> usize {
    DEFAULT_SEARCH_SIZE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyBlock {
    #[serde(default = "default_checks")]
    pub checks: Vec<CertifyCheck>,
    #[serde(default = "default_certify_points")]
    pub n_random: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(rename = "box", default)]
    pub bounds: ParamBox,
    /// Budget of the seeded searches for illustrative points.
    #[serde(default = "default_search_size")]
    pub search_size: usize,
}

impl Default for CertifyBlock {
    fn default() -> Self {
        Self {
            checks: default_checks(),
            n_random: DEFAULT_CERTIFY_POINTS,
            seed: DEFAULT_SEED,
            bounds: ParamBox::default(),
            search_size: DEFAULT_SEARCH_SIZE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    prior_precision: f64,
    pm_precision: f64,
    #[serde(default)]
    outcome_noise_var: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    policy: Option<PolicyStrengthDist>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    params: ParamsFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mu: Option<f64>,
    cost: CostModel,
    #[serde(default = "all_settings")]
    settings: Vec<Setting>,
    #[serde(default)]
    solve: SolveBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sweep: Option<SweepFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    simulate: Option<SimulateBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    certify: Option<CertifyBlock>,
}

fn all_settings() -> Vec<Setting> {
    Setting::ALL.to_vec()
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioFile", into = "ScenarioFile")]
pub struct Scenario {
    pub name: String,
    pub params: ModelParams,
    pub cost: CostModel,
    pub settings: Vec<Setting>,
    pub solve: SolveBlock,
    pub sweep: Option<SweepBlock>,
    pub simulate: Option<SimulateBlock>,
    pub certify: Option<CertifyBlock>,
}

impl TryFrom<ScenarioFile> for Scenario {
    type Error = String;

    fn try_from(f: ScenarioFile) -> Result<Self, String> {
        if f.name.is_empty() || f.name.contains(['\n', '\r']) {
            return Err("name must be a non-empty single line".into());
        }
        let policy = match (f.params.policy, f.mu) {
            (Some(p), None) => p,
            (None, Some(mu)) => PolicyStrengthDist::point_mass(mu).map_err(|e| e.to_string())?,
            (Some(_), Some(_)) => return Err("give either params.policy or mu, not both".into()),
            (None, None) => return Err("missing params.policy (or top-level mu)".into()),
        };
        let params = ModelParams::new(
            f.params.prior_precision,
            f.params.pm_precision,
            f.params.outcome_noise_var,
            policy,
        )
        .map_err(|e| e.to_string())?;
        f.cost.validate().map_err(|e| e.to_string())?;
        if f.settings.is_empty() {
            return Err("settings must not be empty".into());
        }
        let mut seen = f.settings.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != f.settings.len() {
            return Err("settings contain duplicates".into());
        }
        if !(f.solve.tol > 0.0 && f.solve.tol <= 1e-3) {
            return Err(format!("solve.tol must lie in (0, 1e-3], got {}", f.solve.tol));
        }
        let sweep = f.sweep.map(SweepBlock::try_from).transpose()?;
        let scenario = Scenario {
            name: f.name,
            params,
            cost: f.cost,
            settings: f.settings,
            solve: f.solve,
            sweep,
            simulate: f.simulate,
            certify: f.certify,
        };
        if let Some(spec) = scenario.sweep_spec() {
            spec.validate().map_err(|e| e.to_string())?;
        }
        if let Some(sim) = &scenario.simulate {
            if sim.n_samples < crate::montecarlo::MIN_SAMPLES {
                return Err(format!(
                    "simulate.n_samples must be at least {}, got {}",
                    crate::montecarlo::MIN_SAMPLES,
                    sim.n_samples
                ));
            }
            if let Some(k) = sim.k {
                if !(k >= 0.0 && k.is_finite()) {
                    return Err(format!("simulate.k must be finite and >= 0, got {k}"));
                }
            }
        }
        if let Some(c) = &scenario.certify {
            c.bounds.validate().map_err(|e| e.to_string())?;
            if c.checks.is_empty() {
                return Err("certify.checks must not be empty".into());
            }
            if c.n_random == 0 {
                return Err("certify.n_random must be positive".into());
            }
        }
        Ok(scenario)
    }
}

impl From<Scenario> for ScenarioFile {
    fn from(s: Scenario) -> Self {
        ScenarioFile {
            name: s.name,
            params: ParamsFile {
                prior_precision: s.params.prior_precision,
                pm_precision: s.params.pm_precision,
                outcome_noise_var: s.params.outcome_noise_var,
                policy: Some(s.params.policy),
            },
            mu: None,
            cost: s.cost,
            settings: s.settings,
            solve: s.solve,
            sweep: s.sweep.map(SweepFile::from),
            simulate: s.simulate,
            certify: s.certify,
        }
    }
}

impl Scenario {
    pub fn from_json_str(text: &str) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises")
    }

    /// Mean intervention strength.
    pub fn mu(&self) -> f64 {
        self.params.policy.mean()
    }

    pub fn sweep_spec(&self) -> Option<SweepSpec> {
        self.sweep.as_ref().map(|b| SweepSpec {
            parameter: b.parameter,
            grid: b.grid.clone(),
            params: self.params,
            cost: self.cost,
            mu: self.mu(),
            settings: self.settings.clone(),
            tol: self.solve.tol,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"{
        "name": "corner-example",
        "params": { "prior_precision": 1, "pm_precision": 1 },
        "mu": 1,
        "cost": { "kind": "linear", "c": 0.5 },
        "settings": ["none", "opaque"]
    }"#;

    #[test]
    fn parses_shorthand_mu() {
        let s = Scenario::from_json_str(EXAMPLE).unwrap();
        assert_eq!(s.params.policy, PolicyStrengthDist::PointMass { value: 1.0 });
        assert_eq!(s.settings, vec![Setting::NoIntervention, Setting::Opaque]);
        assert_eq!(s.solve.tol, DEFAULT_TOL);
        assert!(s.sweep.is_none());
    }

    #[test]
    fn unknown_key_names_the_key_and_line() {
        let bad = EXAMPLE.replace("\"pm_precision\"", "\"pm_precison\"");
        match Scenario::from_json_str(&bad).unwrap_err() {
            ScenarioError::Parse { line, message, .. } => {
                assert!(message.contains("pm_precison"), "{message}");
                assert_eq!(line, 3);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn invariant_violations_are_parse_errors() {
        let bad = EXAMPLE.replace("\"prior_precision\": 1", "\"prior_precision\": -1");
        let msg = Scenario::from_json_str(&bad).unwrap_err().to_string();
        assert!(msg.contains("prior_precision"), "{msg}");

        let both = EXAMPLE.replace(
            "\"pm_precision\": 1 }",
            "\"pm_precision\": 1, \"policy\": {\"kind\":\"point_mass\",\"value\":1} }",
        );
        assert!(Scenario::from_json_str(&both).is_err());

        let bad_sweep = EXAMPLE.replace(
            "\"settings\"",
            "\"sweep\": {\"parameter\": \"mu\", \"grid\": [1, 0.5, 2]}, \"settings\"",
        );
        assert!(Scenario::from_json_str(&bad_sweep).is_err());
    }

    #[test]
    fn linspace_sweep() {
        let text = EXAMPLE.replace(
            "\"settings\"",
            "\"sweep\": {\"parameter\": \"h\", \"start\": 0.5, \"stop\": 2.5, \"steps\": 5}, \"settings\"",
        );
        let s = Scenario::from_json_str(&text).unwrap();
        assert_eq!(s.sweep.unwrap().grid, vec![0.5, 1.0, 1.5, 2.0, 2.5]);
    }

    #[test]
    fn round_trip() {
        let text = EXAMPLE.replace(
            "\"settings\"",
            "\"sweep\": {\"parameter\": \"sigma2\", \"grid\": [0, 0.3, 1.7]}, \
             \"simulate\": {\"n_samples\": 20000}, \"certify\": {}, \"settings\"",
        );
        let s = Scenario::from_json_str(&text).unwrap();
        let again = Scenario::from_json_str(&s.to_json_string()).unwrap();
        assert_eq!(s, again);
    }
}
