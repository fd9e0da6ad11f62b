//! The `lab` command line.
//!
//! Exit codes: 0 ok, 2 parse error, 3 numeric error, 4 certification failed,
//! 1 for I/O failures.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use forecast_lab_core::model::Setting;
use forecast_lab_core::montecarlo::{compare_mse, verify_total_variance, SimConfig, SimError, MIN_SAMPLES};
use forecast_lab_core::output::{self, CertifySummary, Meta, Table};
use forecast_lab_core::scenario::{CertifyCheck, Scenario, ScenarioError, DEFAULT_SEED};
use forecast_lab_core::solver::{solve, SolveError, SolveResult};
use forecast_lab_core::statics::{
    certify_corollary1, certify_proposition1, certify_proposition3, sweep, StaticsError, DEFAULT_K_PROBES,
};

#[derive(Debug, Parser)]
#[command(name = "lab", version, about = "Optimal forecaster precision under policy intervention")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal precision k* for each setting.
    Solve(CommonArgs),
    /// k* across the scenario's sweep grid.
    Sweep(CommonArgs),
    /// Monte-Carlo MSE against the closed form.
    Simulate(CommonArgs),
    /// Sign and comparison certifications.
    Certify {
        #[command(flatten)]
        common: CommonArgs,
        /// Run only these checks.
        #[arg(long, value_delimiter = ',')]
        only: Vec<CertifyCheck>,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Scenario JSON file.
    pub scenario: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the sample count (simulate) or point count (certify).
    #[arg(long = "n-samples")]
    pub n_samples: Option<u64>,
    /// Overrides the solver tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Statics(#[from] StaticsError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("certification failed: {0}")]
    Certification(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Scenario(ScenarioError::Io { .. }) | CliError::Io { .. } => 1,
            CliError::Scenario(_) | CliError::Usage(_) => 2,
            CliError::Solve(_) | CliError::Statics(_) | CliError::Sim(_) => 3,
            CliError::Certification(_) => 4,
        }
    }
}

/// Files written by a run, relative to the output directory.
pub type Written = Vec<PathBuf>;

pub fn run(cli: &Cli) -> Result<Written, CliError> {
    match &cli.command {
        Command::Solve(args) => run_solve(args),
        Command::Sweep(args) => run_sweep(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Certify { common, only } => run_certify(common, only),
    }
}

fn load(args: &CommonArgs) -> Result<Scenario, CliError> {
    let mut scenario = Scenario::load(&args.scenario)?;
    if let Some(tol) = args.tol {
        if !(tol > 0.0 && tol <= 1e-3) {
            return Err(CliError::Usage(format!("--tol must lie in (0, 1e-3], got {tol}")));
        }
        scenario.solve.tol = tol;
    }
    Ok(scenario)
}

/// Seed recorded for commands that draw no random numbers.
fn recorded_seed(args: &CommonArgs, scenario: &Scenario) -> u64 {
    args.seed
        .or(scenario.simulate.as_ref().map(|b| b.seed))
        .or(scenario.certify.as_ref().map(|b| b.seed))
        .unwrap_or(DEFAULT_SEED)
}

struct Sink<'a> {
    dir: &'a Path,
    meta: Meta,
    written: Written,
}

impl<'a> Sink<'a> {
    fn new(dir: &'a Path, scenario: &Scenario, seed: u64) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir,
            meta: Meta::new(scenario.name.clone(), seed),
            written: Vec::new(),
        })
    }

    fn text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(|source| CliError::Io { path, source })?;
        self.written.push(PathBuf::from(name));
        Ok(())
    }

    fn table(&mut self, name: &str, table: &Table) -> Result<(), CliError> {
        let text = table.render(&self.meta);
        self.text(name, &text)
    }
}

fn solve_all(scenario: &Scenario) -> Result<Vec<SolveResult>, SolveError> {
    let mu = scenario.mu();
    scenario
        .settings
        .iter()
        .map(|&s| solve(s, mu, &scenario.params, &scenario.cost, scenario.solve.tol))
        .collect()
}

fn run_solve(args: &CommonArgs) -> Result<Written, CliError> {
    let scenario = load(args)?;
    let results = solve_all(&scenario)?;
    let mut sink = Sink::new(&args.out, &scenario, recorded_seed(args, &scenario))?;
    sink.table("solve.csv", &output::solve_table(scenario.mu(), &results))?;
    for r in &results {
        println!("{:<12} k* = {:.17e} ({})", r.setting.as_str(), r.k_star, r.solution_kind);
    }
    Ok(sink.written)
}

fn run_sweep(args: &CommonArgs) -> Result<Written, CliError> {
    let scenario = load(args)?;
    let spec = scenario
        .sweep_spec()
        .ok_or_else(|| CliError::Usage(format!("{}: scenario has no `sweep` block", args.scenario.display())))?;
    let table = sweep(&spec)?;
    let mut sink = Sink::new(&args.out, &scenario, recorded_seed(args, &scenario))?;
    sink.table("sweep.csv", &output::sweep_table(&table))?;
    sink.table("sweep_signs.csv", &output::sweep_signs_table(&table))?;
    println!("{} rows over {} values of {}", table.rows.len(), spec.grid.len(), spec.parameter);
    Ok(sink.written)
}

fn run_simulate(args: &CommonArgs) -> Result<Written, CliError> {
    let scenario = load(args)?;
    let block = scenario.simulate.clone().unwrap_or_default();
    let seed = args.seed.unwrap_or(block.seed);
    let n = args.n_samples.unwrap_or(block.n_samples);
    if n < MIN_SAMPLES {
        return Err(CliError::Usage(format!("--n-samples must be at least {MIN_SAMPLES}, got {n}")));
    }
    let mut rows = Vec::new();
    let mut opaque_k = None;
    for &setting in &scenario.settings {
        let k = match block.k {
            Some(k) => k,
            None => solve(setting, scenario.mu(), &scenario.params, &scenario.cost, scenario.solve.tol)?.k_star,
        };
        let config = SimConfig::new(scenario.params, setting, k, n, seed);
        let cmp = compare_mse(&config)?;
        println!(
            "{:<12} k = {:.6e}  mse = {:.8} ± {:.2e}  closed form = {:.8}  z = {:+.3}",
            setting.as_str(),
            k,
            cmp.estimate.mean,
            cmp.estimate.std_error,
            cmp.closed_form,
            cmp.z_score
        );
        if setting == Setting::Opaque {
            opaque_k = Some(k);
        }
        rows.push((setting, k, cmp));
    }
    let mut sink = Sink::new(&args.out, &scenario, seed)?;
    sink.table("simulate.csv", &output::simulate_table(&rows))?;
    if let Some(k) = opaque_k {
        let config = SimConfig::new(scenario.params, Setting::Opaque, k, n, seed);
        let report = verify_total_variance(&config)?;
        sink.table("total_variance.csv", &output::total_variance_table(k, &report))?;
    }
    Ok(sink.written)
}

fn run_certify(args: &CommonArgs, only: &[CertifyCheck]) -> Result<Written, CliError> {
    let scenario = load(args)?;
    let mut block = scenario.certify.clone().unwrap_or_default();
    if let Some(seed) = args.seed {
        block.seed = seed;
    }
    if let Some(n) = args.n_samples {
        block.n_random = usize::try_from(n).map_err(|_| CliError::Usage(format!("--n-samples {n} too large")))?;
        if block.n_random == 0 {
            return Err(CliError::Usage("--n-samples must be positive".into()));
        }
    }
    let mut checks = if only.is_empty() { block.checks.clone() } else { only.to_vec() };
    checks.sort();
    checks.dedup();

    let cost = &scenario.cost;
    let points = block.bounds.sample(block.n_random, block.seed, None);
    let mut sink = Sink::new(&args.out, &scenario, block.seed)?;
    let mut summary = Vec::new();
    for check in checks {
        let name = format!("certify_{}.json", check.as_str());
        let line = match check {
            CertifyCheck::Proposition1 => {
                let r = certify_proposition1(&points, cost)?;
                sink.text(&name, &output::to_json(&r))?;
                CertifySummary {
                    check: check.as_str(),
                    cost: cost.kind_name().into(),
                    points: r.points,
                    checks: r.points,
                    counterexamples: r.counterexamples.len(),
                    passed: r.passed,
                }
            }
            CertifyCheck::Corollary1 => {
                let r = certify_corollary1(&block.bounds, None, cost, block.n_random, block.seed)?;
                sink.text(&name, &output::to_json(&r))?;
                CertifySummary {
                    check: check.as_str(),
                    cost: cost.kind_name().into(),
                    points: r.requested - r.skipped_boundary,
                    checks: r.sign_checks,
                    counterexamples: r.counterexamples.len(),
                    passed: r.passed,
                }
            }
            CertifyCheck::Proposition3 => {
                let r = certify_proposition3(
                    &points,
                    cost,
                    &DEFAULT_K_PROBES,
                    &block.bounds,
                    block.search_size,
                    block.seed,
                )?;
                sink.text(&name, &output::to_json(&r))?;
                CertifySummary {
                    check: check.as_str(),
                    cost: cost.kind_name().into(),
                    points: r.certified_points,
                    checks: r.mb_checks,
                    counterexamples: r.counterexamples.len(),
                    passed: r.passed,
                }
            }
        };
        println!(
            "{:<13} {} checks, {} counterexamples: {}",
            line.check,
            line.checks,
            line.counterexamples,
            if line.passed { "PASS" } else { "FAIL" }
        );
        summary.push(line);
    }
    sink.table("certify.csv", &output::certify_table(&summary))?;
    let failed: Vec<_> = summary.iter().filter(|s| !s.passed).map(|s| s.check).collect();
    if failed.is_empty() {
        Ok(sink.written)
    } else {
        Err(CliError::Certification(failed.join(", ")))
    }
}
