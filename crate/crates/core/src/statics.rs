//! Comparative statics of the optimal precision `k*`.
//!
//! [`sweep`] tabulates `k*` along one parameter. The `certify_*` functions check
//! sign patterns of `k*` over seeded random parameter points and return reports
//! listing every counterexample; a failed check is report content, not an error.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

use crate::model::{self, CostModel, ModelError, ModelParams, PolicyStrengthDist, Regime, Setting};
use crate::rng;
use crate::solver::{self, SolutionKind, SolveError, SolveResult};

/// Differences of `k*` inside `±DEAD_BAND` count as flat.
pub const DEAD_BAND: f64 = 1e-9;
/// Relative step of the finite-difference sign checks.
pub const BUMP: f64 = 1e-4;
/// Points whose `μ` lies within this relative distance of `0` or `(t+h)/h` are
/// treated as boundary points and skipped.
pub const BOUNDARY_MARGIN: f64 = 0.05;
/// Solver tolerance for certifications.
pub const CERTIFY_TOL: f64 = 1e-14;
/// Finite-difference sign checks treat `|Δk*| <= RESOLUTION·max(1, k*)` as flat.
pub const RESOLUTION: f64 = 1e-12;

const SAMPLE_STREAM: u64 = 0x5ee9;
const SEARCH_STREAM: u64 = 0x5ea7c4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StaticsError {
    #[error("invalid sweep: {0}")]
    InvalidSpec(String),
    #[error("grid point {index} ({value}): {source}")]
    Solve {
        index: usize,
        value: f64,
        #[source]
        source: SolveError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweptParameter {
    Mu,
    H,
    T,
    Sigma2,
    C,
}

impl SweptParameter {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweptParameter::Mu => "mu",
            SweptParameter::H => "h",
            SweptParameter::T => "t",
            SweptParameter::Sigma2 => "sigma2",
            SweptParameter::C => "c",
        }
    }
}

impl fmt::Display for SweptParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Increasing,
    Decreasing,
    Flat,
}

impl Sign {
    pub fn of(diff: f64) -> Self {
        if diff > DEAD_BAND {
            Sign::Increasing
        } else if diff < -DEAD_BAND {
            Sign::Decreasing
        } else {
            Sign::Flat
        }
    }

    /// Sign of `to - from` at the certification solver's resolution.
    pub fn resolved(from: f64, to: f64) -> Self {
        let band = RESOLUTION * from.abs().max(to.abs()).max(1.0);
        let diff = to - from;
        if diff > band {
            Sign::Increasing
        } else if diff < -band {
            Sign::Decreasing
        } else {
            Sign::Flat
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Sign::Increasing => "increasing",
            Sign::Decreasing => "decreasing",
            Sign::Flat => "flat",
        }
    }
}

/// One-parameter sweep of `k*`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweptParameter,
    pub grid: Vec<f64>,
    pub params: ModelParams,
    pub cost: CostModel,
    /// Baseline `μ`; replaced by the grid value when sweeping `mu`.
    pub mu: f64,
    pub settings: Vec<Setting>,
    pub tol: f64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), StaticsError> {
        if self.grid.len() < 3 {
            return Err(StaticsError::InvalidSpec(format!(
                "grid needs at least 3 points, got {}",
                self.grid.len()
            )));
        }
        if self.grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(StaticsError::InvalidSpec("grid must be strictly increasing".into()));
        }
        if self.settings.is_empty() {
            return Err(StaticsError::InvalidSpec("no settings requested".into()));
        }
        for (i, &v) in self.grid.iter().enumerate() {
            self.point(v).map_err(|e| StaticsError::InvalidSpec(format!("grid point {i} ({v}): {e}")))?;
        }
        Ok(())
    }

    /// Environment at grid value `v`: `(params, cost, mu, sigma2)`.
    fn point(&self, v: f64) -> Result<(ModelParams, CostModel, f64, f64), ModelError> {
        let sigma2 = self.params.policy.variance();
        match self.parameter {
            SweptParameter::Mu => {
                let params = self.params.with_policy(PolicyStrengthDist::with_moments(v, sigma2)?)?;
                Ok((params, self.cost, v, sigma2))
            }
            SweptParameter::H => Ok((self.params.with_pm_precision(v)?, self.cost, self.mu, sigma2)),
            SweptParameter::T => Ok((self.params.with_prior_precision(v)?, self.cost, self.mu, sigma2)),
            SweptParameter::Sigma2 => {
                let params = self.params.with_policy(PolicyStrengthDist::with_moments(self.mu, v)?)?;
                Ok((params, self.cost, self.mu, v))
            }
            SweptParameter::C => Ok((self.params, self.cost.with_coefficient(v)?, self.mu, sigma2)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub setting: Setting,
    pub regime: Regime,
    pub k_star: f64,
    pub solution_kind: SolutionKind,
    pub objective: f64,
    pub marginal_benefit: f64,
    /// Full expected MSE at `k*`, constants included.
    pub expected_mse: f64,
}

/// Monotonicity of `k*` between adjacent grid values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignStep {
    pub setting: Setting,
    pub from: f64,
    pub to: f64,
    pub sign: Sign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub parameter: SweptParameter,
    /// Grouped by setting in request order, then by grid index.
    pub rows: Vec<SweepRow>,
    pub signs: Vec<SignStep>,
}

impl SweepTable {
    pub fn rows_for(&self, setting: Setting) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.setting == setting)
    }
}

pub fn sweep(spec: &SweepSpec) -> Result<SweepTable, StaticsError> {
    spec.validate()?;
    let mut rows = Vec::with_capacity(spec.grid.len() * spec.settings.len());
    let mut signs = Vec::new();
    for &setting in &spec.settings {
        let solved: Vec<Result<SweepRow, StaticsError>> = spec
            .grid
            .par_iter()
            .enumerate()
            .map(|(index, &value)| {
                let wrap = |source: SolveError| StaticsError::Solve { index, value, source };
                let (params, cost, mu, sigma2) = spec.point(value).map_err(|e| wrap(e.into()))?;
                let res = solver::solve(setting, mu, &params, &cost, spec.tol).map_err(wrap)?;
                let (t, h) = (params.prior_precision, params.pm_precision);
                Ok(SweepRow {
                    value,
                    setting,
                    regime: model::classify_regime(mu, t, h)?,
                    k_star: res.k_star,
                    solution_kind: res.solution_kind,
                    objective: res.objective_value,
                    marginal_benefit: model::marginal_benefit(res.k_star, setting, mu, &params)?,
                    expected_mse: model::expected_mse(res.k_star, setting, mu, sigma2, &params)?,
                })
            })
            .collect();
        let block: Vec<SweepRow> = solved.into_iter().collect::<Result<_, _>>()?;
        signs.extend(block.windows(2).map(|w| SignStep {
            setting,
            from: w[0].value,
            to: w[1].value,
            sign: Sign::of(w[1].k_star - w[0].k_star),
        }));
        rows.extend(block);
    }
    Ok(SweepTable {
        parameter: spec.parameter,
        rows,
        signs,
    })
}

/// A point `(μ, t, h)` of the parameter space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamPoint {
    pub mu: f64,
    pub t: f64,
    pub h: f64,
}

impl ParamPoint {
    pub fn params(&self) -> Result<ModelParams, ModelError> {
        ModelParams::simple(self.t, self.h, self.mu)
    }

    pub fn regime(&self) -> Result<Regime, ModelError> {
        model::classify_regime(self.mu, self.t, self.h)
    }

    /// True when `μ` is within [`BOUNDARY_MARGIN`] of a regime boundary.
    pub fn near_boundary(&self) -> bool {
        let offset = (self.t + self.h) / self.h;
        self.mu.abs() < BOUNDARY_MARGIN || (self.mu - offset).abs() < BOUNDARY_MARGIN * offset
    }

    fn bumped(&self, parameter: SweptParameter) -> ParamPoint {
        let step = |v: f64| v + BUMP * v.abs().max(1.0);
        let mut p = *self;
        match parameter {
            SweptParameter::Mu => p.mu = step(p.mu),
            SweptParameter::H => p.h = step(p.h),
            SweptParameter::T => p.t = step(p.t),
            SweptParameter::Sigma2 | SweptParameter::C => unreachable!("not a point coordinate"),
        }
        p
    }
}

/// Axis-aligned box of `(μ, t, h)` to sample from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamBox {
    pub mu: (f64, f64),
    pub t: (f64, f64),
    pub h: (f64, f64),
}

impl Default for ParamBox {
    fn default() -> Self {
        Self {
            mu: (-3.0, 8.0),
            t: (0.2, 3.0),
            h: (0.2, 3.0),
        }
    }
}

impl ParamBox {
    pub fn validate(&self) -> Result<(), StaticsError> {
        let ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo < hi;
        if !(ok(self.mu) && ok(self.t) && ok(self.h)) {
            return Err(StaticsError::InvalidSpec("box bounds must be finite with lo < hi".into()));
        }
        if self.t.0 <= 0.0 || self.h.0 <= 0.0 {
            return Err(StaticsError::InvalidSpec("precision bounds must be positive".into()));
        }
        Ok(())
    }

    /// `n` uniform draws; `regime` restricts `μ` to that regime's interval (away
    /// from its boundaries) intersected with the box.
    pub fn sample(&self, n: usize, seed: u64, regime: Option<Regime>) -> Vec<ParamPoint> {
        self.sample_stream(n, seed, SAMPLE_STREAM, regime)
    }

    fn sample_stream(&self, n: usize, seed: u64, stream: u64, regime: Option<Regime>) -> Vec<ParamPoint> {
        let mut r = rng::substream(seed, stream);
        let mut unit = |(lo, hi): (f64, f64)| lo + (hi - lo) * rng::open_unit(&mut r);
        let mut out = Vec::with_capacity(n);
        let mut attempts = 0usize;
        while out.len() < n {
            attempts += 1;
            assert!(attempts <= 1000 * n.max(1), "regime {regime:?} does not intersect the box");
            let t = unit(self.t);
            let h = unit(self.h);
            let offset = (t + h) / h;
            let range = match regime {
                None => self.mu,
                Some(Regime::Reinforcing) => (self.mu.0, self.mu.1.min(-BOUNDARY_MARGIN)),
                Some(Regime::Preventive) => (
                    self.mu.0.max(BOUNDARY_MARGIN),
                    self.mu.1.min((1.0 - BOUNDARY_MARGIN) * offset),
                ),
                Some(Regime::Overreacting) => (self.mu.0.max((1.0 + BOUNDARY_MARGIN) * offset), self.mu.1),
                Some(Regime::Boundary) => (0.0, 0.0),
            };
            if !(range.0 < range.1) {
                continue;
            }
            out.push(ParamPoint { mu: unit(range), t, h });
        }
        out
    }
}

fn solve_at(setting: Setting, p: &ParamPoint, cost: &CostModel) -> Result<SolveResult, SolveError> {
    solver::solve(setting, p.mu, &p.params()?, cost, CERTIFY_TOL)
}

/// Expected direction of `k*` in one parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expected {
    NonIncreasing,
    NonDecreasing,
    Exempt,
}

/// Signs of `∂k*/∂μ`, `∂k*/∂h`, `∂k*/∂t` by regime under intervention.
pub fn corollary1_expectation(regime: Regime, parameter: SweptParameter) -> Expected {
    use Expected::*;
    use SweptParameter as P;
    match (regime, parameter) {
        (Regime::Reinforcing, P::Mu) => NonIncreasing,
        (Regime::Reinforcing, P::H) => NonDecreasing,
        (Regime::Reinforcing, P::T) => NonIncreasing,
        (Regime::Preventive, P::Mu) => NonIncreasing,
        (Regime::Preventive, P::H) => NonIncreasing,
        (Regime::Overreacting, P::Mu) => NonDecreasing,
        (Regime::Overreacting, P::H) => NonDecreasing,
        (Regime::Overreacting, P::T) => NonIncreasing,
        _ => Exempt,
    }
}

/// Strict checks apply only when `k* > 0` at both evaluation points.
fn conforms(expected: Expected, sign: Sign, strict: bool) -> bool {
    match (expected, strict) {
        (Expected::Exempt, _) => true,
        (Expected::NonIncreasing, true) => sign == Sign::Decreasing,
        (Expected::NonDecreasing, true) => sign == Sign::Increasing,
        (Expected::NonIncreasing, false) => sign != Sign::Increasing,
        (Expected::NonDecreasing, false) => sign != Sign::Decreasing,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignCounterexample {
    pub point: ParamPoint,
    pub regime: Regime,
    pub parameter: SweptParameter,
    pub expected: Expected,
    pub strict: bool,
    pub k_base: f64,
    pub k_bumped: f64,
    pub observed: Sign,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegimeCounts {
    pub reinforcing: usize,
    pub preventive: usize,
    pub overreacting: usize,
}

impl RegimeCounts {
    fn bump(&mut self, regime: Regime) {
        match regime {
            Regime::Reinforcing => self.reinforcing += 1,
            Regime::Preventive => self.preventive += 1,
            Regime::Overreacting => self.overreacting += 1,
            Regime::Boundary => {}
        }
    }
}

/// Observed `∂k*/∂t` signs in the preventive regime, where no sign is certified.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AmbiguousTEffect {
    pub increasing: usize,
    pub decreasing: usize,
    pub flat: usize,
    /// A preventive point where `k*` strictly rises with `t`.
    pub rising_example: Option<ParamPoint>,
    /// A preventive point where `k*` strictly falls with `t`.
    pub falling_example: Option<ParamPoint>,
    /// Extra preventive points drawn while looking for a missing example.
    pub extra_searched: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corollary1Report {
    pub cost: CostModel,
    pub seed: u64,
    pub requested: usize,
    pub skipped_boundary: usize,
    pub regimes: RegimeCounts,
    pub sign_checks: usize,
    pub strict_checks: usize,
    pub counterexamples: Vec<SignCounterexample>,
    pub preventive_t_effect: AmbiguousTEffect,
    pub passed: bool,
}

struct PointOutcome {
    regime: Option<Regime>,
    checks: usize,
    strict_checks: usize,
    counterexamples: Vec<SignCounterexample>,
    t_sign: Option<Sign>,
}

fn corollary1_point(p: &ParamPoint, cost: &CostModel) -> Result<PointOutcome, SolveError> {
    let regime = p.regime()?;
    let skipped = PointOutcome {
        regime: None,
        checks: 0,
        strict_checks: 0,
        counterexamples: Vec::new(),
        t_sign: None,
    };
    if regime == Regime::Boundary || p.near_boundary() {
        return Ok(skipped);
    }
    let base = solve_at(Setting::Opaque, p, cost)?;
    let mut out = PointOutcome {
        regime: Some(regime),
        ..skipped
    };
    for parameter in [SweptParameter::Mu, SweptParameter::H, SweptParameter::T] {
        let q = p.bumped(parameter);
        if q.regime()? != regime {
            continue;
        }
        let bumped = solve_at(Setting::Opaque, &q, cost)?;
        let sign = Sign::resolved(base.k_star, bumped.k_star);
        let strict = base.k_star > 0.0 && bumped.k_star > 0.0;
        let expected = corollary1_expectation(regime, parameter);
        if expected == Expected::Exempt {
            out.t_sign = Some(sign);
            continue;
        }
        out.checks += 1;
        out.strict_checks += strict as usize;
        if !conforms(expected, sign, strict) {
            out.counterexamples.push(SignCounterexample {
                point: *p,
                regime,
                parameter,
                expected,
                strict,
                k_base: base.k_star,
                k_bumped: bumped.k_star,
                observed: sign,
            });
        }
    }
    Ok(out)
}

/// Finite-difference sign check of `k*` in `μ`, `h` and `t` under intervention
/// over `n_random` seeded points of `bounds`.
pub fn certify_corollary1(
    bounds: &ParamBox,
    regime: Option<Regime>,
    cost: &CostModel,
    n_random: usize,
    seed: u64,
) -> Result<Corollary1Report, StaticsError> {
    bounds.validate()?;
    cost.validate()?;
    let points = bounds.sample(n_random, seed, regime);
    let outcomes = points
        .par_iter()
        .enumerate()
        .map(|(index, p)| {
            corollary1_point(p, cost).map_err(|source| StaticsError::Solve {
                index,
                value: p.mu,
                source,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut report = Corollary1Report {
        cost: *cost,
        seed,
        requested: n_random,
        skipped_boundary: 0,
        regimes: RegimeCounts::default(),
        sign_checks: 0,
        strict_checks: 0,
        counterexamples: Vec::new(),
        preventive_t_effect: AmbiguousTEffect::default(),
        passed: false,
    };
    for (p, o) in points.iter().zip(outcomes) {
        let Some(regime) = o.regime else {
            report.skipped_boundary += 1;
            continue;
        };
        report.regimes.bump(regime);
        report.sign_checks += o.checks;
        report.strict_checks += o.strict_checks;
        report.counterexamples.extend(o.counterexamples);
        if let Some(sign) = o.t_sign {
            record_t_sign(&mut report.preventive_t_effect, sign, *p);
        }
    }
    search_t_ambiguity(&mut report.preventive_t_effect, bounds, cost, seed)?;
    report.passed = report.counterexamples.is_empty();
    Ok(report)
}

fn record_t_sign(effect: &mut AmbiguousTEffect, sign: Sign, p: ParamPoint) {
    match sign {
        Sign::Increasing => {
            effect.increasing += 1;
            effect.rising_example.get_or_insert(p);
        }
        Sign::Decreasing => {
            effect.decreasing += 1;
            effect.falling_example.get_or_insert(p);
        }
        Sign::Flat => effect.flat += 1,
    }
}

const T_SEARCH_BUDGET: usize = 2000;

/// Draws extra preventive points until both signs of `∂k*/∂t` have an example or
/// the budget runs out.
fn search_t_ambiguity(
    effect: &mut AmbiguousTEffect,
    bounds: &ParamBox,
    cost: &CostModel,
    seed: u64,
) -> Result<(), StaticsError> {
    if effect.rising_example.is_some() && effect.falling_example.is_some() {
        return Ok(());
    }
    let candidates = bounds.sample_stream(T_SEARCH_BUDGET, seed, SEARCH_STREAM, Some(Regime::Preventive));
    for (index, p) in candidates.iter().enumerate() {
        effect.extra_searched += 1;
        let q = p.bumped(SweptParameter::T);
        if q.regime()? != Regime::Preventive {
            continue;
        }
        let wrap = |source| StaticsError::Solve {
            index,
            value: p.mu,
            source,
        };
        let k0 = solve_at(Setting::Opaque, p, cost).map_err(wrap)?.k_star;
        let k1 = solve_at(Setting::Opaque, &q, cost).map_err(wrap)?.k_star;
        match Sign::resolved(k0, k1) {
            Sign::Increasing => {
                effect.rising_example.get_or_insert(*p);
            }
            Sign::Decreasing => {
                effect.falling_example.get_or_insert(*p);
            }
            Sign::Flat => {}
        }
        if effect.rising_example.is_some() && effect.falling_example.is_some() {
            break;
        }
    }
    Ok(())
}

/// How the intervention changes state-driven outcome variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attenuation {
    /// `0 < μ < 2(t+h)/h`: `R < 1`.
    Attenuating,
    /// `μ < 0` or `μ > 2(t+h)/h`: `R > 1`.
    Amplifying,
    /// `μ ∈ {0, 2(t+h)/h}`: `R = 1`.
    Neutral,
}

pub fn attenuation_class(mu: f64, t: f64, h: f64) -> Result<Attenuation, ModelError> {
    let upper = 2.0 * model::full_offset_strength(t, h)?;
    Ok(if mu > 0.0 && mu < upper {
        Attenuation::Attenuating
    } else if mu < 0.0 || mu > upper {
        Attenuation::Amplifying
    } else {
        Attenuation::Neutral
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCounterexample {
    pub point: ParamPoint,
    pub k_intervention: f64,
    pub k_reference: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposition1Report {
    pub cost: CostModel,
    pub points: usize,
    pub attenuating: usize,
    pub amplifying: usize,
    pub neutral: usize,
    pub counterexamples: Vec<ComparisonCounterexample>,
    pub passed: bool,
}

/// `k*_opaque ≤ k*_none` when intervention attenuates, `≥` when it amplifies,
/// equal when `R = 1`, all up to [`DEAD_BAND`].
pub fn certify_proposition1(points: &[ParamPoint], cost: &CostModel) -> Result<Proposition1Report, StaticsError> {
    cost.validate()?;
    let outcomes = points
        .par_iter()
        .enumerate()
        .map(|(index, p)| -> Result<_, StaticsError> {
            let wrap = |source| StaticsError::Solve {
                index,
                value: p.mu,
                source,
            };
            let class = attenuation_class(p.mu, p.t, p.h)?;
            let ko = solve_at(Setting::Opaque, p, cost).map_err(wrap)?.k_star;
            let kn = solve_at(Setting::NoIntervention, p, cost).map_err(wrap)?.k_star;
            let ok = match class {
                Attenuation::Attenuating => ko <= kn + DEAD_BAND,
                Attenuation::Amplifying => ko >= kn - DEAD_BAND,
                Attenuation::Neutral => (ko - kn).abs() <= DEAD_BAND,
            };
            let cex = (!ok).then(|| ComparisonCounterexample {
                point: *p,
                k_intervention: ko,
                k_reference: kn,
                detail: format!("{class:?}: k*_opaque = {ko}, k*_none = {kn}"),
            });
            Ok((class, cex))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut report = Proposition1Report {
        cost: *cost,
        points: points.len(),
        attenuating: 0,
        amplifying: 0,
        neutral: 0,
        counterexamples: Vec::new(),
        passed: false,
    };
    for (class, cex) in outcomes {
        match class {
            Attenuation::Attenuating => report.attenuating += 1,
            Attenuation::Amplifying => report.amplifying += 1,
            Attenuation::Neutral => report.neutral += 1,
        }
        report.counterexamples.extend(cex);
    }
    report.passed = report.counterexamples.is_empty();
    Ok(report)
}

/// Precisions at which marginal benefits are compared, on top of both `k*`.
pub const DEFAULT_K_PROBES: [f64; 9] = [0.0, 0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0];

/// A point where disclosure of `s_P` strictly raises `k*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransparencyRaise {
    pub point: ParamPoint,
    pub k_opaque: f64,
    pub k_transparent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposition3Report {
    pub cost: CostModel,
    pub points: usize,
    pub certified_points: usize,
    pub mb_checks: usize,
    pub counterexamples: Vec<ComparisonCounterexample>,
    /// Points with `0 < μ < 2(t+h)/h`, outside the certified set.
    pub excluded: usize,
    pub excluded_raised: usize,
    pub excluded_lowered: usize,
    pub excluded_equal: usize,
    /// Preventive point where transparency strictly raises `k*`, if found.
    pub raise_example: Option<TransparencyRaise>,
    pub raise_search_size: usize,
    pub passed: bool,
}

enum P3Outcome {
    Certified { checks: usize, cex: Vec<ComparisonCounterexample> },
    Excluded(Sign),
}

/// Disclosure lowers the marginal benefit and `k*` whenever `μ ≤ 0` or
/// `μ ≥ 2(t+h)/h`. Points outside that set are tallied descriptively, and a
/// seeded search looks for a preventive point where disclosure raises `k*`.
pub fn certify_proposition3(
    points: &[ParamPoint],
    cost: &CostModel,
    k_probes: &[f64],
    search_box: &ParamBox,
    search_size: usize,
    seed: u64,
) -> Result<Proposition3Report, StaticsError> {
    cost.validate()?;
    search_box.validate()?;
    let outcomes = points
        .par_iter()
        .enumerate()
        .map(|(index, p)| -> Result<P3Outcome, StaticsError> {
            let wrap = |source| StaticsError::Solve {
                index,
                value: p.mu,
                source,
            };
            let ko = solve_at(Setting::Opaque, p, cost).map_err(wrap)?.k_star;
            let kt = solve_at(Setting::Transparent, p, cost).map_err(wrap)?.k_star;
            if attenuation_class(p.mu, p.t, p.h)? == Attenuation::Attenuating {
                return Ok(P3Outcome::Excluded(Sign::of(kt - ko)));
            }
            let params = p.params()?;
            let mut cex = Vec::new();
            let mut checks = 0;
            for &k in k_probes.iter().chain([ko, kt].iter()) {
                let mb_t = model::marginal_benefit(k, Setting::Transparent, p.mu, &params)?;
                let mb_o = model::marginal_benefit(k, Setting::Opaque, p.mu, &params)?;
                checks += 1;
                if mb_t > mb_o {
                    cex.push(ComparisonCounterexample {
                        point: *p,
                        k_intervention: ko,
                        k_reference: kt,
                        detail: format!("at k = {k}: MB_transparent = {mb_t} > MB_opaque = {mb_o}"),
                    });
                }
            }
            if kt > ko + DEAD_BAND {
                cex.push(ComparisonCounterexample {
                    point: *p,
                    k_intervention: ko,
                    k_reference: kt,
                    detail: format!("k*_transparent = {kt} > k*_opaque = {ko}"),
                });
            }
            Ok(P3Outcome::Certified { checks, cex })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut report = Proposition3Report {
        cost: *cost,
        points: points.len(),
        certified_points: 0,
        mb_checks: 0,
        counterexamples: Vec::new(),
        excluded: 0,
        excluded_raised: 0,
        excluded_lowered: 0,
        excluded_equal: 0,
        raise_example: None,
        raise_search_size: 0,
        passed: false,
    };
    for o in outcomes {
        match o {
            P3Outcome::Certified { checks, cex } => {
                report.certified_points += 1;
                report.mb_checks += checks;
                report.counterexamples.extend(cex);
            }
            P3Outcome::Excluded(sign) => {
                report.excluded += 1;
                match sign {
                    Sign::Increasing => report.excluded_raised += 1,
                    Sign::Decreasing => report.excluded_lowered += 1,
                    Sign::Flat => report.excluded_equal += 1,
                }
            }
        }
    }
    let (example, searched) = search_transparency_raise(search_box, cost, search_size, seed)?;
    report.raise_example = example;
    report.raise_search_size = searched;
    report.passed = report.counterexamples.is_empty();
    Ok(report)
}

/// Seeded search of the preventive region for `k*_transparent > k*_opaque`.
/// Returns the first hit and the number of points examined.
pub fn search_transparency_raise(
    bounds: &ParamBox,
    cost: &CostModel,
    budget: usize,
    seed: u64,
) -> Result<(Option<TransparencyRaise>, usize), StaticsError> {
    let candidates = bounds.sample_stream(budget, seed, SEARCH_STREAM + 1, Some(Regime::Preventive));
    for (index, p) in candidates.iter().enumerate() {
        let wrap = |source| StaticsError::Solve {
            index,
            value: p.mu,
            source,
        };
        let ko = solve_at(Setting::Opaque, p, cost).map_err(wrap)?.k_star;
        let kt = solve_at(Setting::Transparent, p, cost).map_err(wrap)?.k_star;
        if kt > ko + DEAD_BAND {
            return Ok((
                Some(TransparencyRaise {
                    point: *p,
                    k_opaque: ko,
                    k_transparent: kt,
                }),
                index + 1,
            ));
        }
    }
    Ok((None, candidates.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(parameter: SweptParameter, grid: Vec<f64>, mu: f64, cost: CostModel) -> SweepSpec {
        SweepSpec {
            parameter,
            grid,
            params: ModelParams::simple(1.0, 1.0, mu).unwrap(),
            cost,
            mu,
            settings: vec![Setting::Opaque],
            tol: CERTIFY_TOL,
        }
    }

    #[test]
    fn mu_sweep_in_preventive_regime_decreases() {
        let grid: Vec<f64> = (1..=9).map(|i| 0.2 * i as f64).collect();
        let t = sweep(&spec(SweptParameter::Mu, grid, 1.0, CostModel::quadratic(0.5).unwrap())).unwrap();
        assert_eq!(t.rows.len(), 9);
        assert!(t.rows.iter().all(|r| r.regime == Regime::Preventive));
        assert!(t.signs.iter().all(|s| s.sign != Sign::Increasing));
        // quadratic cost keeps the solution interior, so the decrease is strict
        assert!(t.signs.iter().all(|s| s.sign == Sign::Decreasing));
    }

    #[test]
    fn h_sweep_with_reinforcing_policy_increases() {
        let grid = vec![0.25, 0.5, 1.0, 2.0, 4.0];
        let t = sweep(&spec(SweptParameter::H, grid, -0.5, CostModel::quadratic(0.5).unwrap())).unwrap();
        assert!(t.signs.iter().all(|s| s.sign == Sign::Increasing));
    }

    #[test]
    fn sigma2_sweep_is_bitwise_constant() {
        let grid = vec![0.0, 0.1, 0.5, 2.0, 10.0];
        let t = sweep(&spec(SweptParameter::Sigma2, grid, 0.7, CostModel::linear(0.1).unwrap())).unwrap();
        let k0 = t.rows[0].k_star;
        assert!(t.rows.iter().all(|r| r.k_star.to_bits() == k0.to_bits()));
        assert!(t.signs.iter().all(|s| s.sign == Sign::Flat));
        // the loss itself does move with σ²
        assert!(t.rows[4].expected_mse > t.rows[0].expected_mse);
    }

    #[test]
    fn sweep_rejects_bad_grids() {
        let c = CostModel::linear(0.5).unwrap();
        assert!(sweep(&spec(SweptParameter::Mu, vec![0.1, 0.2], 1.0, c)).is_err());
        assert!(sweep(&spec(SweptParameter::Mu, vec![0.1, 0.3, 0.2], 1.0, c)).is_err());
        assert!(sweep(&spec(SweptParameter::H, vec![-1.0, 0.5, 1.0], 1.0, c)).is_err());
        assert!(sweep(&spec(SweptParameter::Sigma2, vec![-1.0, 0.5, 1.0], 1.0, c)).is_err());
    }

    #[test]
    fn sample_respects_regime() {
        let b = ParamBox::default();
        for regime in [Regime::Reinforcing, Regime::Preventive, Regime::Overreacting] {
            let pts = b.sample(200, 9, Some(regime));
            assert!(pts.iter().all(|p| p.regime().unwrap() == regime && !p.near_boundary()));
        }
        assert_eq!(b.sample(50, 3, None), b.sample(50, 3, None));
    }

    #[test]
    fn flat_corner_counts_as_conforming() {
        // Expensive linear cost: k* = 0 on both sides of every bump.
        let p = ParamPoint { mu: 1.0, t: 1.0, h: 1.0 };
        let out = corollary1_point(&p, &CostModel::linear(5.0).unwrap()).unwrap();
        assert_eq!(out.checks, 2);
        assert_eq!(out.strict_checks, 0);
        assert!(out.counterexamples.is_empty());
    }

    #[test]
    fn proposition1_examples() {
        let c = CostModel::linear(0.5).unwrap();
        let pts = [
            ParamPoint { mu: 1.0, t: 1.0, h: 1.0 },
            ParamPoint { mu: -1.0, t: 1.0, h: 1.0 },
            ParamPoint { mu: 4.0, t: 1.0, h: 1.0 },
        ];
        let r = certify_proposition1(&pts, &c).unwrap();
        assert!(r.passed, "{:?}", r.counterexamples);
        assert_eq!((r.attenuating, r.amplifying, r.neutral), (1, 1, 1));
        let ko = solve_at(Setting::Opaque, &pts[1], &c).unwrap().k_star;
        assert!((ko - (1.5 * 2f64.sqrt() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn proposition3_excludes_preventive_points() {
        let c = CostModel::quadratic(1.0).unwrap();
        let pts = [
            ParamPoint { mu: -1.0, t: 1.0, h: 1.0 },
            ParamPoint { mu: 0.0, t: 1.0, h: 1.0 },
            ParamPoint { mu: 1.5, t: 1.0, h: 1.0 },
        ];
        let r = certify_proposition3(&pts, &c, &DEFAULT_K_PROBES, &ParamBox::default(), 500, 1).unwrap();
        assert!(r.passed, "{:?}", r.counterexamples);
        assert_eq!(r.certified_points, 2);
        assert_eq!(r.excluded, 1);
        assert_eq!(r.excluded_raised, 1);
        assert!(r.raise_example.is_some());
    }

    #[test]
    fn expectation_table() {
        use Expected::*;
        use SweptParameter as P;
        assert_eq!(corollary1_expectation(Regime::Reinforcing, P::H), NonDecreasing);
        assert_eq!(corollary1_expectation(Regime::Preventive, P::H), NonIncreasing);
        assert_eq!(corollary1_expectation(Regime::Preventive, P::T), Exempt);
        assert_eq!(corollary1_expectation(Regime::Overreacting, P::Mu), NonDecreasing);
        assert!(conforms(NonIncreasing, Sign::Flat, false));
        assert!(!conforms(NonIncreasing, Sign::Flat, true));
        assert!(!conforms(NonDecreasing, Sign::Decreasing, false));
    }
}
