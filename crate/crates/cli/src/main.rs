use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use wosno_cli::bench::{cmd_bench, BenchConfig};
use wosno_cli::config::{load_file, HasRun, Override};
use wosno_cli::greens_check::{cmd_greens_check, GreensCheckConfig};
use wosno_cli::inpaint::{cmd_inpaint, InpaintConfig};
use wosno_cli::solve::{cmd_solve, SolveConfig};
use wosno_cli::train::{cmd_train, TrainCmdConfig};
use wosno_cli::{CliError, EXIT_USAGE};

/// Grid-free Walk-on-Spheres solvers and weakly supervised surrogates.
#[derive(Debug, Parser)]
#[command(
    name = "wosno",
    version,
    after_help = "Any other --dotted.key=value argument overrides the matching config field."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate a solution field on a point set and write it as CSV.
    Solve(RunArgs),
    /// Train an MLP surrogate from walk targets.
    Train(RunArgs),
    /// Fill the masked pixels of a PGM image.
    Inpaint(RunArgs),
    /// Check the Green's-function identities; exits 2 on failure.
    GreensCheck(RunArgs),
    /// Sweep the walk count and report estimator variance and cost.
    Bench(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// JSON config file; omitted fields take their defaults.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Shorthand for --run.seed=N.
    #[arg(long)]
    seed: Option<u64>,
    /// Shorthand for --run.workers=N (default: $WOSNO_WORKERS, then all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Shorthand for --run.output_dir=DIR.
    #[arg(long)]
    out: Option<PathBuf>,
}

const FLAGS: [&str; 4] = ["config", "seed", "workers", "out"];

/// Splits `--key=value` config overrides from the arguments clap parses.
fn split_overrides(args: impl IntoIterator<Item = String>) -> (Vec<String>, Vec<String>) {
    args.into_iter().partition(|a| {
        let key = a
            .strip_prefix("--")
            .and_then(|b| b.split_once('='))
            .map(|(k, _)| k);
        !matches!(key, Some(k) if !FLAGS.contains(&k))
    })
}

impl RunArgs {
    fn load<T: DeserializeOwned>(&self, raw: &[String]) -> Result<T, CliError> {
        let mut overrides = raw
            .iter()
            .map(|o| Override::parse(o))
            .collect::<Result<Vec<_>, _>>()?;
        let run = |key: &str, value: serde_json::Value| Override {
            path: vec!["run".into(), key.into()],
            value,
        };
        if let Some(s) = self.seed {
            overrides.push(run("seed", s.into()));
        }
        if let Some(w) = self.workers {
            overrides.push(run("workers", w.into()));
        }
        if let Some(o) = &self.out {
            overrides.push(run("output_dir", o.display().to_string().into()));
        }
        load_file(self.config.as_deref(), &overrides)
    }
}

fn prepare<T: DeserializeOwned + HasRun>(
    args: &RunArgs,
    overrides: &[String],
) -> Result<(T, usize), CliError> {
    let cfg: T = args.load(overrides)?;
    let workers = cfg.run().resolve_workers()?;
    Ok((cfg, workers))
}

fn run(cli: Cli, overrides: &[String]) -> anyhow::Result<()> {
    match cli.command {
        Command::Solve(args) => {
            let (cfg, workers) = prepare::<SolveConfig>(&args, overrides)?;
            let path = cmd_solve(&cfg, workers).context("solve")?;
            println!("wrote {}", path.display());
        }
        Command::Train(args) => {
            let (cfg, workers) = prepare::<TrainCmdConfig>(&args, overrides)?;
            let out = cmd_train(&cfg, workers).context("train")?;
            let s = &out.summary;
            println!(
                "trained {} steps in {:.1} s, final loss {:.3e}",
                s.steps,
                s.train_seconds,
                s.final_loss.unwrap_or(f64::NAN)
            );
            if let Some(e) = &s.evaluation {
                println!(
                    "held-out mse {:.3e} vs {}-walk baseline {:.3e} (ratio {:.2})",
                    e.surrogate_mse, e.baseline_trajectories, e.baseline_mse, e.ratio
                );
            }
            println!(
                "wrote {}",
                cfg.run.output_dir.join(&cfg.outputs.checkpoint).display()
            );
        }
        Command::Inpaint(args) => {
            let (cfg, workers) = prepare::<InpaintConfig>(&args, overrides)?;
            let (path, summary) = cmd_inpaint(&cfg, workers).context("inpaint")?;
            println!(
                "filled {} pixels in {:.1} s, mean standard error {:.2e}",
                summary.stats.masked_pixels, summary.seconds, summary.stats.mean_standard_error
            );
            println!("wrote {}", path.display());
        }
        Command::GreensCheck(args) => {
            let (cfg, workers) = prepare::<GreensCheckConfig>(&args, overrides)?;
            let (path, _) = cmd_greens_check(&cfg, workers).context("greens-check")?;
            println!("wrote {}", path.display());
        }
        Command::Bench(args) => {
            let (cfg, workers) = prepare::<BenchConfig>(&args, overrides)?;
            let (path, summary) = cmd_bench(&cfg, workers).context("bench")?;
            for r in &summary.rows {
                println!(
                    "L={:<6} variance {:.4e}  L*variance {:.4e}  {:.3} s",
                    r.trajectories, r.variance, r.scaled_variance, r.seconds
                );
            }
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let (args, overrides) = split_overrides(std::env::args());
    let cli = Cli::parse_from(args);
    match run(cli, &overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .downcast_ref::<CliError>()
                .map_or(EXIT_USAGE, CliError::exit_code);
            ExitCode::from(code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_are_split_from_flags() {
        let argv = [
            "wosno",
            "solve",
            "--seed=3",
            "--trajectories=10",
            "--workers",
            "2",
            "--a.b=x",
            "--out=o",
        ];
        let (clap_args, overrides) = split_overrides(argv.iter().map(|s| s.to_string()));
        assert_eq!(
            clap_args,
            ["wosno", "solve", "--seed=3", "--workers", "2", "--out=o"]
        );
        assert_eq!(overrides, ["--trajectories=10", "--a.b=x"]);
    }
}
