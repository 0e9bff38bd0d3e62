use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use serde::Serialize;

use qme_core::covering::{count_grid, GridRequest};
use qme_core::entropy::{compare_theorems, estimate_entropy, power_rule_check, CheckLevel};
use qme_core::{OrbitTable, Quantity};

use crate::config::Experiment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Both,
}

impl Format {
    fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
}

/// How a command ended, mapped onto the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    CheckFailed,
    PreconditionWarning,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::CheckFailed => 1,
            Outcome::PreconditionWarning => 2,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Core(#[from] qme_core::Error),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("cannot encode JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub struct Sink {
    dir: PathBuf,
    prefix: String,
    format: Format,
    written: Vec<PathBuf>,
}

impl Sink {
    pub fn new(dir: PathBuf, prefix: String, format: Format) -> Self {
        Self { dir, prefix, format, written: Vec::new() }
    }

    fn write(&mut self, name: &str, ext: &str, body: &str) -> Result<(), RunError> {
        fs::create_dir_all(&self.dir).map_err(|source| RunError::Write { path: self.dir.clone(), source })?;
        let path = self.dir.join(format!("{}_{name}.{ext}", self.prefix));
        fs::write(&path, body).map_err(|source| RunError::Write { path: path.clone(), source })?;
        info!("wrote {}", path.display());
        self.written.push(path);
        Ok(())
    }

    fn csv(&mut self, name: &str, body: &str) -> Result<(), RunError> {
        if self.format.csv() {
            self.write(name, "csv", body)?;
        }
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), RunError> {
        if self.format.json() {
            let mut text = serde_json::to_string_pretty(value)?;
            text.push('\n');
            self.write(name, "json", &text)?;
        }
        Ok(())
    }

    /// JSON is written even under `--format csv` when a command has no tabular output.
    fn json_always<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), RunError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, "json", &text)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

fn orbits(exp: &Experiment, n_max: usize) -> Result<OrbitTable, RunError> {
    Ok(OrbitTable::build(&exp.map, &exp.cloud, n_max)?)
}

fn n_max(exp: &Experiment) -> usize {
    *exp.config.schedule.n_list.last().expect("validated nonempty")
}

pub fn validate(exp: &Experiment, sink: &mut Sink) -> Result<Outcome, RunError> {
    let report = exp.qmetric.check_axioms(&exp.cloud, exp.config.triple_budget, exp.config.seed)?;
    sink.json_always("axioms", &report)?;
    if sink.format.csv() {
        let mut csv = String::from("x,y,z,lhs,rhs\n");
        for v in &report.violations {
            let _ = writeln!(csv, "{},{},{},{},{}", v.x, v.y, v.z, v.lhs, v.rhs);
        }
        sink.csv("triangle_violations", &csv)?;
    }
    let mark = |ok: bool| if ok { "ok" } else { "FAILED" };
    println!("quasi-metric {} on {} points", report.metric, report.points);
    println!("  nonnegativity  {}", mark(report.nonnegativity_ok));
    println!("  identity       {}", mark(report.identity_ok));
    println!(
        "  triangle       {} ({} triples, {})",
        mark(report.triangle_ok),
        report.triples_checked,
        if report.exhaustive { "exhaustive".to_string() } else { format!("sampled, seed {}", report.seed) }
    );
    println!("  symmetric      {} (max asymmetry {})", report.symmetric, report.max_asymmetry);
    for v in report.violations.iter().take(10) {
        println!("  violation: e({},{}) = {} > e({},{}) + e({},{}) = {}", v.x, v.z, v.lhs, v.x, v.y, v.y, v.z, v.rhs);
    }
    if report.violations.len() > 10 {
        println!("  ... {} violations in total", report.violations.len());
    }
    for (x, y) in report.identity_failures.iter().take(10) {
        println!("  identity failure: e({x},{y}) = 0 for distinct points");
    }
    Ok(if report.all_ok() { Outcome::Success } else { Outcome::CheckFailed })
}

pub fn counts(exp: &Experiment, sink: &mut Sink) -> Result<Outcome, RunError> {
    let table = orbits(exp, n_max(exp))?;
    let request = GridRequest {
        n_list: &exp.config.schedule.n_list,
        epsilon_list: &exp.config.schedule.epsilon_list,
        quantities: &Quantity::ALL,
        mode: exp.config.mode,
        exact_threshold: exp.config.exact_threshold,
    };
    let grid = count_grid(&exp.qmetric, &table, &request)?;
    sink.csv("counts", &grid.to_csv())?;
    sink.json("counts", &grid)?;
    println!(
        "{} cells over {} points, {}",
        grid.cells.len(),
        grid.cloud_size,
        if grid.all_exact() { "all exact" } else { "some greedy" }
    );
    for d in &grid.diagnostics {
        println!("  note: {d}");
    }
    Ok(Outcome::Success)
}

pub fn entropy(exp: &Experiment, sink: &mut Sink) -> Result<Outcome, RunError> {
    let table = orbits(exp, n_max(exp))?;
    let settings = exp.config.settings();
    let mut estimates = Vec::new();
    let mut csv = String::new();
    for &variant in &exp.config.variants {
        let (est, _) = estimate_entropy(
            &exp.qmetric,
            &table,
            variant,
            &exp.config.schedule.n_list,
            &exp.config.schedule.epsilon_list,
            &settings,
        )?;
        let body = est.to_csv();
        if csv.is_empty() {
            csv.push_str(&body);
        } else {
            csv.extend(body.lines().skip(1).map(|l| format!("{l}\n")));
        }
        println!(
            "{:<15} {:.6} at eps={}{}",
            variant.as_str(),
            est.extrapolated,
            est.extrapolated_epsilon,
            if est.stabilized { "" } else { " (not stabilized)" }
        );
        estimates.push(est);
    }
    sink.csv("entropy", &csv)?;
    sink.json("entropy", &estimates)?;
    Ok(Outcome::Success)
}

pub fn compare(exp: &Experiment, sink: &mut Sink) -> Result<Outcome, RunError> {
    let table = orbits(exp, n_max(exp))?;
    let report = compare_theorems(
        &exp.qmetric,
        &table,
        &exp.config.schedule.n_list,
        &exp.config.schedule.epsilon_list,
        &exp.config.settings(),
    )?;
    let mut csv = String::from("check,level,passed,cells_checked,cells_skipped\n");
    for c in &report.checks {
        let level = match c.level {
            CheckLevel::Count => "count",
            CheckLevel::Estimate => "estimate",
        };
        let _ = writeln!(csv, "{},{level},{},{},{}", c.name, c.passed, c.cells_checked, c.cells_skipped);
        println!(
            "{:<28} {:<8} {} ({} checked, {} skipped)",
            c.name,
            level,
            if c.passed { "pass" } else { "FAIL" },
            c.cells_checked,
            c.cells_skipped
        );
        for f in c.failures.iter().take(5) {
            println!("    {f}");
        }
    }
    for e in &report.estimates {
        println!("{:<15} {:.6}", e.variant.as_str(), e.extrapolated);
    }
    sink.csv("compare", &csv)?;
    sink.csv("compare_counts", &report.grid.to_csv())?;
    sink.json("compare", &report)?;
    Ok(if report.count_checks_pass() && report.estimate_checks_pass() { Outcome::Success } else { Outcome::CheckFailed })
}

pub fn power(exp: &Experiment, m: usize, sink: &mut Sink) -> Result<Outcome, RunError> {
    let report = power_rule_check(
        &exp.map,
        m,
        &exp.cloud,
        &exp.qmetric,
        &exp.config.schedule.n_list,
        &exp.config.schedule.epsilon_list,
        &exp.config.settings(),
    )?;
    let mut csv = String::from("n,epsilon,power_count,base_count,exact,holds\n");
    for c in &report.cells {
        let _ = writeln!(csv, "{},{},{},{},{},{}", c.n, c.epsilon, c.power_count, c.base_count, c.exact, c.holds);
    }
    sink.csv("power", &csv)?;
    sink.json("power", &report)?;
    println!("power rule for {} with m={}", report.map, report.m);
    println!("  count inequality   {}", if report.count_check_passed { "pass" } else { "FAIL" });
    println!(
        "  estimates          {:.6} vs {:.6} (tolerance {:.6}) {}",
        report.power_estimate.extrapolated,
        report.scaled_base,
        report.tolerance,
        if report.estimate_check_passed { "pass" } else { "FAIL" }
    );
    for d in &report.diagnostics {
        eprintln!("warning: {d}");
    }
    Ok(if !report.uniformly_continuous_declared {
        Outcome::PreconditionWarning
    } else if report.count_check_passed && report.estimate_check_passed {
        Outcome::Success
    } else {
        Outcome::CheckFailed
    })
}
