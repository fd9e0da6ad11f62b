//! Deterministic CSV and JSON output.
//!
//! Every CSV starts with a `#` comment line carrying the tool version, scenario
//! name and seed, followed by a header row. Floats are written in scientific
//! notation with 17 significant digits, which round-trips every `f64`.

use serde::Serialize;

use crate::montecarlo::{MseComparison, TermCheck, TotalVarianceReport};
use crate::solver::SolveResult;
use crate::statics::SweepTable;

pub const TOOL_NAME: &str = "forecast-lab";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Run metadata written into the comment line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Meta {
    pub scenario: String,
    pub seed: u64,
}

impl Meta {
    pub fn new(scenario: impl Into<String>, seed: u64) -> Self {
        Self {
            scenario: scenario.into(),
            seed,
        }
    }

    pub fn comment_line(&self) -> String {
        format!(
            "# {TOOL_NAME} {TOOL_VERSION} scenario={} seed={}",
            self.scenario, self.seed
        )
    }
}

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        // drop the sign of negative zero
        return format!("{:.16e}", 0.0);
    }
    format!("{v:.16e}")
}

/// A table of already formatted cells.
#[derive(Debug, Clone, Default)]
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width must match header");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self, meta: &Meta) -> String {
        let mut buf = meta.comment_line().into_bytes();
        buf.push(b'\n');
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(buf);
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        let buf = w.into_inner().expect("in-memory flush");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

pub fn solve_table(mu: f64, results: &[SolveResult]) -> Table {
    let mut t = Table::new(&[
        "setting",
        "mu",
        "k_star",
        "solution_kind",
        "objective",
        "first_order_residual",
        "iterations",
    ]);
    for r in results {
        t.push(vec![
            r.setting.to_string(),
            fmt_f64(mu),
            fmt_f64(r.k_star),
            r.solution_kind.to_string(),
            fmt_f64(r.objective_value),
            fmt_f64(r.first_order_residual),
            r.iterations.to_string(),
        ]);
    }
    t
}

pub fn sweep_table(table: &SweepTable) -> Table {
    let mut t = Table::new(&[
        "parameter",
        "value",
        "setting",
        "regime",
        "k_star",
        "solution_kind",
        "objective",
        "marginal_benefit",
        "expected_mse",
    ]);
    for r in &table.rows {
        t.push(vec![
            table.parameter.to_string(),
            fmt_f64(r.value),
            r.setting.to_string(),
            r.regime.to_string(),
            fmt_f64(r.k_star),
            r.solution_kind.to_string(),
            fmt_f64(r.objective),
            fmt_f64(r.marginal_benefit),
            fmt_f64(r.expected_mse),
        ]);
    }
    t
}

pub fn sweep_signs_table(table: &SweepTable) -> Table {
    let mut t = Table::new(&["parameter", "setting", "from", "to", "sign"]);
    for s in &table.signs {
        t.push(vec![
            table.parameter.to_string(),
            s.setting.to_string(),
            fmt_f64(s.from),
            fmt_f64(s.to),
            s.sign.as_str().to_string(),
        ]);
    }
    t
}

pub fn simulate_table(rows: &[(crate::model::Setting, f64, MseComparison)]) -> Table {
    let mut t = Table::new(&["setting", "k", "n_samples", "mean", "std_error", "closed_form", "z_score"]);
    for (setting, k, c) in rows {
        t.push(vec![
            setting.to_string(),
            fmt_f64(*k),
            c.estimate.n.to_string(),
            fmt_f64(c.estimate.mean),
            fmt_f64(c.estimate.std_error),
            fmt_f64(c.closed_form),
            fmt_f64(c.z_score),
        ]);
    }
    t
}

pub fn total_variance_table(k: f64, report: &TotalVarianceReport) -> Table {
    let mut t = Table::new(&["term", "k", "estimate", "std_error", "closed_form", "z_score", "passed"]);
    let terms: [(&str, &TermCheck); 4] = [
        ("total", &report.total),
        ("explained", &report.explained),
        ("residual", &report.residual),
        ("identity_gap", &report.identity_gap),
    ];
    for (name, c) in terms {
        t.push(vec![
            name.to_string(),
            fmt_f64(k),
            fmt_f64(c.estimate.mean),
            fmt_f64(c.estimate.std_error),
            fmt_f64(c.closed_form),
            fmt_f64(c.z_score),
            c.passed().to_string(),
        ]);
    }
    t
}

/// One line of the certification summary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertifySummary {
    pub check: &'static str,
    pub cost: String,
    pub points: usize,
    pub checks: usize,
    pub counterexamples: usize,
    pub passed: bool,
}

pub fn certify_table(rows: &[CertifySummary]) -> Table {
    let mut t = Table::new(&["check", "cost", "points", "checks", "counterexamples", "passed"]);
    for r in rows {
        t.push(vec![
            r.check.to_string(),
            r.cost.clone(),
            r.points.to_string(),
            r.checks.to_string(),
            r.counterexamples.to_string(),
            r.passed.to_string(),
        ]);
    }
    t
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serialises");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CostModel, ModelParams, Setting};
    use crate::solver::{solve, DEFAULT_TOL};

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 1e300, f64::MIN_POSITIVE, 0.0] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(fmt_f64(-0.0), fmt_f64(0.0));
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn comment_then_header() {
        let params = ModelParams::simple(1.0, 1.0, 1.0).unwrap();
        let cost = CostModel::linear(0.5).unwrap();
        let results: Vec<_> = Setting::ALL
            .iter()
            .map(|&s| solve(s, 1.0, &params, &cost, DEFAULT_TOL).unwrap())
            .collect();
        let text = solve_table(1.0, &results).render(&Meta::new("ex", 7));
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            format!("# forecast-lab {TOOL_VERSION} scenario=ex seed=7")
        );
        assert!(lines.next().unwrap().starts_with("setting,mu,k_star"));
        assert_eq!(lines.count(), 3);
        assert!(text.ends_with('\n'));
    }
}
