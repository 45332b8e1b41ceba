//! `wosno solve`: a field of walk estimates written as CSV.

use std::io::{BufWriter, Write};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use wosno::geometry::DomainSpec;
use wosno::{EstimateKeys, PointEstimate};

use crate::config::{HasRun, Provenance, RunSettings};
use crate::error::{CliError, Result};
use crate::problem::{build_solver, PointSpec, ProblemSpec, WalkOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    #[serde(default)]
    pub run: RunSettings,
    /// Required for `constant` problems other than on the unit disk.
    #[serde(default)]
    pub domain: Option<DomainSpec>,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub points: PointSpec,
    #[serde(default = "default_trajectories")]
    pub trajectories: usize,
    #[serde(default)]
    pub walk: WalkOptions,
    #[serde(default = "default_output")]
    pub output: String,
}

fn default_trajectories() -> usize {
    1000
}

fn default_output() -> String {
    "solve.csv".into()
}

impl HasRun for SolveConfig {
    fn run(&self) -> &RunSettings {
        &self.run
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub estimates: Vec<PointEstimate>,
}

/// Runs the walks; call inside the worker pool.
pub fn solve(cfg: &SolveConfig) -> Result<(SolveOutcome, Box<dyn crate::problem::FieldSolver>)> {
    if cfg.trajectories == 0 {
        return Err(CliError::Config("trajectories must be >= 1".into()));
    }
    let solver = build_solver(&cfg.problem, &cfg.domain, &cfg.walk, cfg.run.seed)?;
    let points = solver.points(&cfg.points, cfg.run.seed)?;
    let estimates = solver.estimate(&points, cfg.trajectories, EstimateKeys::default())?;
    let outcome = SolveOutcome {
        dim: solver.dim(),
        points,
        estimates,
    };
    Ok((outcome, solver))
}

/// Writes `<output_dir>/<output>`: the provenance line, then the CSV table.
pub fn cmd_solve(cfg: &SolveConfig, workers: usize) -> Result<PathBuf> {
    let (outcome, solver) = wosno::estimator::with_workers(workers, || solve(cfg))??;
    let path = cfg.run.output_path(&cfg.output)?;
    let file = std::fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| CliError::io(&path, e);
    writeln!(w, "{}", Provenance::new(cfg, workers).comment_line()).map_err(io)?;
    solver.write_csv(&mut w, &outcome.points, &outcome.estimates)?;
    w.flush().map_err(io)?;
    Ok(path)
}
