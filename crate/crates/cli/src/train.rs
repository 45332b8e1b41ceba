//! `wosno train`: weak-supervision training of an MLP surrogate.

use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use wosno::pde_family::{ConstantFamily, LinearFamily, OperatorFamily, VcFamily};
use wosno::rng::substream;
use wosno::surrogate::{
    evaluate, held_out_set, layer_sizes, train, write_history_csv, Evaluation, Mlp, TrainConfig,
    DEFAULT_HIDDEN,
};

use crate::config::{HasRun, Provenance, RunSettings};
use crate::error::{CliError, Result};

/// Stream id for weight initialisation.
const INIT_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FamilySpec {
    Linear,
    Constant,
    Vc {
        #[serde(default = "default_mesh")]
        mesh: String,
    },
}

fn default_mesh() -> String {
    "builtin:cube".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeldOutConfig {
    pub instances: usize,
    pub points: usize,
    pub reference_trajectories: usize,
    pub baseline_trajectories: usize,
}

impl Default for HeldOutConfig {
    fn default() -> Self {
        Self {
            instances: 100,
            points: 4,
            reference_trajectories: 10_000,
            baseline_trajectories: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOutputs {
    pub checkpoint: String,
    pub history: String,
    pub summary: String,
}

impl Default for TrainOutputs {
    fn default() -> Self {
        Self {
            checkpoint: "model.bin".into(),
            history: "loss.csv".into(),
            summary: "train_summary.json".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainCmdConfig {
    #[serde(default)]
    pub run: RunSettings,
    pub family: FamilySpec,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    /// `train.seed` is taken from `run.seed`.
    #[serde(default)]
    pub train: TrainConfig,
    /// Evaluation against high-fidelity references; skipped when absent.
    #[serde(default)]
    pub held_out: Option<HeldOutConfig>,
    #[serde(default)]
    pub outputs: TrainOutputs,
}

fn default_hidden() -> Vec<usize> {
    DEFAULT_HIDDEN.to_vec()
}

impl HasRun for TrainCmdConfig {
    fn run(&self) -> &RunSettings {
        &self.run
    }
}

impl TrainCmdConfig {
    /// The optimiser config with the run seed applied.
    pub fn resolved_train(&self) -> Result<TrainConfig> {
        if self.train.seed != TrainConfig::default().seed && self.train.seed != self.run.seed {
            return Err(CliError::Config(
                "set the seed with run.seed, not train.seed".into(),
            ));
        }
        Ok(TrainConfig {
            seed: self.run.seed,
            ..self.train.clone()
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub header: String,
    pub family: String,
    pub layer_sizes: Vec<usize>,
    pub steps: usize,
    pub walks: u64,
    pub truncated_walks: u64,
    pub final_loss: Option<f64>,
    pub final_lr: f64,
    pub train_seconds: f64,
    pub evaluation: Option<Evaluation>,
}

pub struct TrainOutcome {
    pub model: Mlp,
    pub history: Vec<wosno::surrogate::StepLog>,
    pub summary: TrainSummary,
}

fn run_family<const D: usize, F: OperatorFamily<D>>(
    family: &F,
    cfg: &TrainCmdConfig,
    header: String,
) -> Result<TrainOutcome> {
    let tc = cfg.resolved_train()?;
    if cfg.hidden.contains(&0) {
        return Err(CliError::Config("hidden layer widths must be >= 1".into()));
    }
    let sizes = layer_sizes(family.feature_len(), &cfg.hidden);
    let mut model = Mlp::init(&sizes, &mut substream(tc.seed, INIT_STREAM, 0, 0))?;
    let start = Instant::now();
    let report = train(&mut model, family, &tc)?;
    let train_seconds = start.elapsed().as_secs_f64();
    let evaluation = match cfg.held_out {
        Some(h) => {
            let set = held_out_set(
                family,
                h.instances,
                h.points,
                h.reference_trajectories,
                tc.seed,
            )?;
            Some(evaluate(&model, family, &set, h.baseline_trajectories)?)
        }
        None => None,
    };
    let summary = TrainSummary {
        header,
        family: family.name().into(),
        layer_sizes: sizes,
        steps: report.history.len(),
        walks: report.walks,
        truncated_walks: report.truncated_walks,
        final_loss: report.history.last().map(|h| h.loss),
        final_lr: report.final_lr,
        train_seconds,
        evaluation,
    };
    Ok(TrainOutcome {
        model,
        history: report.history,
        summary,
    })
}

/// Trains without writing anything; call inside the worker pool.
pub fn train_surrogate(cfg: &TrainCmdConfig, header: String) -> Result<TrainOutcome> {
    match &cfg.family {
        FamilySpec::Linear => run_family(&LinearFamily, cfg, header),
        FamilySpec::Constant => run_family(&ConstantFamily, cfg, header),
        FamilySpec::Vc { mesh } => run_family(&VcFamily::new(mesh)?, cfg, header),
    }
}

/// Writes the checkpoint, the loss curve and the summary JSON.
pub fn cmd_train(cfg: &TrainCmdConfig, workers: usize) -> Result<TrainOutcome> {
    let prov = Provenance::new(cfg, workers);
    let outcome = wosno::estimator::with_workers(workers, || train_surrogate(cfg, prov.text()))??;
    let ckpt = cfg.run.output_path(&cfg.outputs.checkpoint)?;
    let io = |e| CliError::io(&ckpt, e);
    let mut w = BufWriter::new(std::fs::File::create(&ckpt).map_err(io)?);
    outcome.model.write_to(&mut w, &prov.text())?;
    w.flush().map_err(io)?;
    let hist: PathBuf = cfg.run.output_path(&cfg.outputs.history)?;
    let io = |e| CliError::io(&hist, e);
    let mut w = BufWriter::new(std::fs::File::create(&hist).map_err(io)?);
    writeln!(w, "{}", prov.comment_line()).map_err(io)?;
    write_history_csv(&mut w, &outcome.history)?;
    w.flush().map_err(io)?;
    crate::write_json(
        &cfg.run.output_path(&cfg.outputs.summary)?,
        &outcome.summary,
    )?;
    Ok(outcome)
}
