//! `wosno bench`: estimator variance and wall-clock cost as `L` grows.

use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use wosno::geometry::DomainSpec;
use wosno::EstimateKeys;

use crate::config::{HasRun, Provenance, RunSettings};
use crate::error::{CliError, Result};
use crate::problem::{build_solver, ProblemSpec, WalkOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default)]
    pub run: RunSettings,
    #[serde(default)]
    pub domain: Option<DomainSpec>,
    pub problem: ProblemSpec,
    /// Evaluation point; defaults to the bounding-box centre.
    #[serde(default)]
    pub point: Option<Vec<f64>>,
    #[serde(default = "default_sweep")]
    pub trajectories: Vec<usize>,
    /// Independent repetitions of each `L`-walk estimate.
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default)]
    pub walk: WalkOptions,
    #[serde(default = "default_output")]
    pub output: String,
    #[serde(default = "default_summary")]
    pub summary: String,
}

fn default_sweep() -> Vec<usize> {
    vec![1, 10, 100, 1000]
}

fn default_replicas() -> usize {
    200
}

fn default_output() -> String {
    "bench.csv".into()
}

fn default_summary() -> String {
    "bench_summary.json".into()
}

impl HasRun for BenchConfig {
    fn run(&self) -> &RunSettings {
        &self.run
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchRow {
    pub trajectories: usize,
    pub replicas: usize,
    /// Mean of the replica estimates.
    pub mean: f64,
    /// Unbiased variance across replicas.
    pub variance: f64,
    /// `variance × L`: flat when variance decays as `1/L`.
    pub scaled_variance: f64,
    pub seconds: f64,
    pub walks_per_second: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchSummary {
    pub header: String,
    pub point: Vec<f64>,
    pub rows: Vec<BenchRow>,
    /// Least-squares slope of `ln variance` against `ln L`; −1 is ideal.
    pub variance_slope: Option<f64>,
}

fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

fn log_slope(rows: &[BenchRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.variance > 0.0)
        .map(|r| ((r.trajectories as f64).ln(), r.variance.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / n,
        pts.iter().map(|p| p.1).sum::<f64>() / n,
    );
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Replica `r` of every sweep entry walks on instance stream `r`, so rows
/// share random numbers and differ only through `L`.
pub fn bench(cfg: &BenchConfig) -> Result<(Vec<f64>, Vec<BenchRow>)> {
    if cfg.replicas < 2 {
        return Err(CliError::Config("replicas must be >= 2".into()));
    }
    if cfg.trajectories.is_empty() || cfg.trajectories.contains(&0) {
        return Err(CliError::Config(
            "trajectories must be a non-empty list of counts >= 1".into(),
        ));
    }
    let solver = build_solver(&cfg.problem, &cfg.domain, &cfg.walk, cfg.run.seed)?;
    let point = cfg.point.clone().unwrap_or_else(|| solver.center());
    let points = [point.clone()];
    let mut rows = Vec::with_capacity(cfg.trajectories.len());
    for &l in &cfg.trajectories {
        let start = Instant::now();
        let values: Vec<f64> = (0..cfg.replicas as u64)
            .into_par_iter()
            .map(|r| Ok(solver.estimate(&points, l, EstimateKeys::new(r, 0))?[0].mean()))
            .collect::<Result<_>>()?;
        let seconds = start.elapsed().as_secs_f64();
        let variance = sample_variance(&values);
        rows.push(BenchRow {
            trajectories: l,
            replicas: cfg.replicas,
            mean: values.iter().sum::<f64>() / values.len() as f64,
            variance,
            scaled_variance: variance * l as f64,
            seconds,
            walks_per_second: (cfg.replicas * l) as f64 / seconds.max(1e-12),
        });
    }
    Ok((point, rows))
}

pub fn cmd_bench(cfg: &BenchConfig, workers: usize) -> Result<(PathBuf, BenchSummary)> {
    let (point, rows) = wosno::estimator::with_workers(workers, || bench(cfg))??;
    let prov = Provenance::new(cfg, workers);
    let path = cfg.run.output_path(&cfg.output)?;
    let io = |e| CliError::io(&path, e);
    let mut w = BufWriter::new(std::fs::File::create(&path).map_err(io)?);
    writeln!(w, "{}", prov.comment_line()).map_err(io)?;
    writeln!(
        w,
        "trajectories,replicas,mean,variance,scaled_variance,seconds,walks_per_second"
    )
    .map_err(io)?;
    for r in &rows {
        writeln!(
            w,
            "{},{},{},{},{},{:.6},{:.1}",
            r.trajectories,
            r.replicas,
            r.mean,
            r.variance,
            r.scaled_variance,
            r.seconds,
            r.walks_per_second
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)?;
    let summary = BenchSummary {
        header: prov.text(),
        point,
        variance_slope: log_slope(&rows),
        rows,
    };
    crate::write_json(&cfg.run.output_path(&cfg.summary)?, &summary)?;
    Ok((path, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_inverse_law() {
        let rows: Vec<BenchRow> = [1usize, 10, 100]
            .iter()
            .map(|&l| BenchRow {
                trajectories: l,
                replicas: 2,
                mean: 0.0,
                variance: 3.0 / l as f64,
                scaled_variance: 3.0,
                seconds: 1.0,
                walks_per_second: 1.0,
            })
            .collect();
        assert!((log_slope(&rows).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(log_slope(&rows[..1]), None);
    }

    #[test]
    fn sample_variance_oracle() {
        assert_eq!(sample_variance(&[1.0, 3.0]), 2.0);
    }
}
