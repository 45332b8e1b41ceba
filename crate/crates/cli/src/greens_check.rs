//! `wosno greens-check`: identity suite for the ball kernels.

use std::f64::consts::PI;
use std::path::PathBuf;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use wosno::greens::{ball_volume, greens_ball, greens_ball_mass, ScreenedBall};
use wosno::rng::substream;

use crate::config::{HasRun, Provenance, RunSettings};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreensCheckConfig {
    pub run: RunSettings,
    /// Uniform samples per (d, r) mass check.
    pub samples: usize,
    pub radii: Vec<f64>,
    /// Relative tolerance of the mass identity.
    pub mass_tolerance: f64,
    /// Random `(r, σ̄)` pairs for the balance identity.
    pub balance_pairs: usize,
    pub balance_tolerance: f64,
    /// Simpson panels for the volume-mass quadrature.
    pub quadrature_panels: usize,
    pub output: String,
}

impl Default for GreensCheckConfig {
    fn default() -> Self {
        Self {
            run: RunSettings::default(),
            samples: 1_000_000,
            radii: vec![0.5, 1.0, 2.0],
            mass_tolerance: 5e-3,
            balance_pairs: 50,
            balance_tolerance: 1e-6,
            quadrature_panels: 4000,
            output: "greens_check.json".into(),
        }
    }
}

impl HasRun for GreensCheckConfig {
    fn run(&self) -> &RunSettings {
        &self.run
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub expected: f64,
    pub deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: String, measured: f64, expected: f64, deviation: f64, tolerance: f64) -> Self {
        Self {
            name,
            measured,
            expected,
            deviation,
            tolerance,
            pass: deviation <= tolerance,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GreensReport {
    pub header: String,
    pub checks: Vec<Check>,
    pub pass: bool,
}

const CHUNK: usize = 1 << 14;

/// `|B_r| · mean G_r(ρ)` over uniform points of the ball, summed in fixed
/// chunks so the value does not depend on the worker count.
///
/// Sample `i` draws its radial CDF value from the stratum `[i, i+1)/n`: each
/// point is still uniform in the ball, but the strata remove most of the
/// variance from the radial direction, which is all `G_r` depends on.
pub fn sampled_greens_mass(d: usize, r: f64, samples: usize, seed: u64) -> Result<f64> {
    let chunks = samples.div_ceil(CHUNK);
    let sums: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, d as u64, r.to_bits(), c as u64);
            let first = c * CHUNK;
            let mut s = 0.0;
            for i in first..samples.min(first + CHUNK) {
                // Radius of a uniform point: r·U^{1/d}; U > 0 keeps ρ off the centre.
                let u = (i as f64 + 1.0 - rng.random::<f64>()) / samples as f64;
                s += greens_ball(d, r, r * u.powf(1.0 / d as f64))?;
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;
    Ok(ball_volume(d, r) * sums.iter().sum::<f64>() / samples as f64)
}

/// Composite Simpson rule for `∫₀^r 4πρ² G^σ̄(ρ) dρ`.
pub fn quadrature_volume_mass(ball: &ScreenedBall, panels: usize) -> Result<f64> {
    let n = panels + panels % 2;
    let h = ball.radius / n as f64;
    let f = |rho: f64| -> Result<f64> {
        if rho == 0.0 {
            Ok(0.0)
        } else {
            Ok(4.0 * PI * rho * rho * ball.greens(rho)?)
        }
    };
    let mut total = f(0.0)? + f(ball.radius)?;
    for i in 1..n {
        total += f(i as f64 * h)? * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    Ok(total * h / 3.0)
}

pub fn greens_check(cfg: &GreensCheckConfig) -> Result<Vec<Check>> {
    if cfg.samples == 0 || cfg.quadrature_panels < 2 {
        return Err(CliError::Config(
            "samples must be >= 1 and quadrature_panels >= 2".into(),
        ));
    }
    let mut checks = Vec::new();
    for d in [2usize, 3] {
        for &r in &cfg.radii {
            if !(r > 0.0) {
                return Err(CliError::Config(format!("radius {r} must be > 0")));
            }
            let measured = sampled_greens_mass(d, r, cfg.samples, cfg.run.seed)?;
            let expected = greens_ball_mass(d, r);
            let dev = (measured / expected - 1.0).abs();
            checks.push(Check::new(
                format!("greens_mass d={d} r={r}"),
                measured,
                expected,
                dev,
                cfg.mass_tolerance,
            ));
        }
    }
    let zero = ScreenedBall::new(1.0, 0.0)?.surface_mass();
    checks.push(Check::new(
        "surface_mass sigma_bar=0".into(),
        zero,
        1.0,
        (zero - 1.0).abs(),
        1e-12,
    ));
    let tiny = ScreenedBall::new(1.0, 1e-8)?.surface_mass();
    // Must approach 1 from below.
    let dev = if tiny <= 1.0 {
        1.0 - tiny
    } else {
        f64::INFINITY
    };
    checks.push(Check::new(
        "surface_mass sigma_bar=1e-8".into(),
        tiny,
        1.0,
        dev,
        1e-6,
    ));
    let mut rng = substream(cfg.run.seed, 0, u64::MAX, 0);
    let mut worst = (0.0f64, 0.0, 0.0, 1.0);
    for _ in 0..cfg.balance_pairs {
        let r = rng.random_range(0.1..2.0);
        let sigma_bar = 10f64.powf(rng.random_range(-3.0..2.0));
        let ball = ScreenedBall::new(r, sigma_bar)?;
        let balance =
            ball.surface_mass() + sigma_bar * quadrature_volume_mass(&ball, cfg.quadrature_panels)?;
        let dev = (balance - 1.0).abs();
        if dev >= worst.0 {
            worst = (dev, r, sigma_bar, balance);
        }
    }
    checks.push(Check::new(
        format!(
            "screened_balance worst of {} (r={:.4}, sigma_bar={:.4})",
            cfg.balance_pairs, worst.1, worst.2
        ),
        worst.3,
        1.0,
        worst.0,
        cfg.balance_tolerance,
    ));
    Ok(checks)
}

/// Prints one line per check and writes the JSON report. Failing checks
/// turn into [`CliError::CheckFailed`] after the report is written.
pub fn cmd_greens_check(
    cfg: &GreensCheckConfig,
    workers: usize,
) -> Result<(PathBuf, GreensReport)> {
    let checks = wosno::estimator::with_workers(workers, || greens_check(cfg))??;
    for c in &checks {
        println!(
            "{} {}: measured {:.9} expected {:.9} deviation {:.3e} (tolerance {:.1e})",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.expected,
            c.deviation,
            c.tolerance
        );
    }
    let report = GreensReport {
        header: Provenance::new(cfg, workers).text(),
        pass: checks.iter().all(|c| c.pass),
        checks,
    };
    let path = cfg.run.output_path(&cfg.output)?;
    crate::write_json(&path, &report)?;
    if !report.pass {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect();
        return Err(CliError::CheckFailed(failed.join("; ")));
    }
    Ok((path, report))
}
