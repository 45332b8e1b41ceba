//! Weak-supervision training: regress the surrogate against L-trajectory
//! walk estimates, optionally refined across epochs by the target cache.

use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Adam, Mlp, PlateauScheduler};
use crate::error::{Error, Result};
use crate::estimator::{CacheKey, EstimateCache, EstimateKeys, PointEstimate};
use crate::pde_family::OperatorFamily;
use crate::rng::{substream, WalkRng};
use crate::vector::Vector;

/// Loss above which training aborts.
pub const DIVERGENCE_LOSS: f64 = 1e6;

// Auxiliary streams use point ids no walk ever reaches.
const POOL_STREAM: u64 = u64::MAX;
const POINT_STREAM: u64 = u64::MAX - 1;
const ORDER_STREAM: u64 = u64::MAX - 2;
const HELD_OUT_BASE: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Optimizer steps; each draws a fresh batch of walk targets.
    pub steps: usize,
    /// Instances drawn once up front and cycled through.
    pub pool_size: usize,
    /// N
    pub points_per_instance: usize,
    /// M
    pub instances_per_step: usize,
    /// L
    pub trajectories: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub plateau_factor: f64,
    /// Checked once per pass over the pool, on the mean pass loss.
    pub plateau_patience: usize,
    /// Freeze per-instance points and average targets across visits.
    pub caching: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 20_000,
            pool_size: 1000,
            points_per_instance: 1024,
            instances_per_step: 1,
            trajectories: 10,
            learning_rate: 1e-3,
            weight_decay: 1e-6,
            plateau_factor: 0.9,
            plateau_patience: 2,
            caching: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("pool_size", self.pool_size),
            ("points_per_instance", self.points_per_instance),
            ("instances_per_step", self.instances_per_step),
            ("trajectories", self.trajectories),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("{name} must be >= 1")));
        }
        if self.instances_per_step > self.pool_size {
            return Err(Error::InvalidConfig(
                "instances_per_step exceeds pool_size".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.weight_decay >= 0.0) {
            return Err(Error::InvalidConfig(
                "learning_rate must be > 0, weight_decay >= 0".into(),
            ));
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor <= 1.0) {
            return Err(Error::InvalidConfig(
                "plateau_factor must be in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepLog {
    pub step: usize,
    pub loss: f64,
    pub lr: f64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub history: Vec<StepLog>,
    pub walks: u64,
    pub truncated_walks: u64,
    pub final_lr: f64,
}

fn feature_rows<const D: usize, F: OperatorFamily<D>>(
    family: &F,
    inst: &F::Instance,
    points: &[Vector<D>],
    out: &mut Vec<f64>,
) {
    let params = family.params(inst);
    for p in points {
        out.extend_from_slice(p);
        out.extend_from_slice(&params);
    }
}

fn sample_pool<const D: usize, F: OperatorFamily<D>>(
    family: &F,
    ids: &[u64],
    seed: u64,
) -> Result<Vec<F::Instance>> {
    ids.par_iter()
        .map(|&j| family.sample_instance(&mut substream(seed, j, POOL_STREAM, 0)))
        .collect()
}

fn check_model<const D: usize, F: OperatorFamily<D>>(model: &Mlp, family: &F) -> Result<()> {
    if model.input_len() != family.feature_len() {
        return Err(Error::ShapeMismatch {
            expected: family.feature_len(),
            actual: model.input_len(),
        });
    }
    Ok(())
}

/// Runs `cfg.steps` optimizer steps of weak-supervision regression.
///
/// Each step takes the next `M` instances of a per-pass shuffle of the pool,
/// runs `L` fresh walks at each of their `N` points and minimises the mean
/// squared error against the targets. With caching, points are frozen per
/// instance and the target is the mean of every walk run there so far.
pub fn train<const D: usize, F: OperatorFamily<D>>(
    model: &mut Mlp,
    family: &F,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    check_model(model, family)?;
    let mut report = TrainReport {
        history: Vec::with_capacity(cfg.steps),
        walks: 0,
        truncated_walks: 0,
        final_lr: cfg.learning_rate,
    };
    if cfg.steps == 0 {
        return Ok(report);
    }
    let start = Instant::now();
    let pool = sample_pool(
        family,
        &(0..cfg.pool_size as u64).collect::<Vec<_>>(),
        cfg.seed,
    )?;
    let frozen: Vec<Vec<Vector<D>>> = if cfg.caching {
        pool.par_iter()
            .enumerate()
            .map(|(j, inst)| {
                let mut rng = substream(cfg.seed, j as u64, POINT_STREAM, 0);
                family.sample_points(inst, cfg.points_per_instance, &mut rng)
            })
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let mut cache = EstimateCache::new();
    let mut visits = vec![0u64; cfg.pool_size];
    let mut opt = Adam::new(model.params().len(), cfg.learning_rate, cfg.weight_decay);
    let mut sched = PlateauScheduler::new(cfg.plateau_factor, cfg.plateau_patience);
    let steps_per_pass = cfg.pool_size.div_ceil(cfg.instances_per_step);
    let mut order: Vec<usize> = Vec::new();
    let mut pass_loss = 0.0;
    let mut features = Vec::new();
    let mut targets = Vec::new();

    for step in 0..cfg.steps {
        let pos = step % steps_per_pass;
        if pos == 0 {
            order = (0..cfg.pool_size).collect();
            let mut rng = substream(cfg.seed, (step / steps_per_pass) as u64, ORDER_STREAM, 0);
            order.shuffle(&mut rng);
        }
        let batch = &order
            [pos * cfg.instances_per_step..((pos + 1) * cfg.instances_per_step).min(cfg.pool_size)];
        features.clear();
        targets.clear();
        for &j in batch {
            let inst = &pool[j];
            let resampled;
            let points: &[Vector<D>] = if cfg.caching {
                &frozen[j]
            } else {
                let mut rng = substream(cfg.seed, j as u64, POINT_STREAM, step as u64 + 1);
                resampled = family.sample_points(inst, cfg.points_per_instance, &mut rng)?;
                &resampled
            };
            let walk_cfg = family.walk_config(inst, cfg.seed);
            let keys = EstimateKeys::new(j as u64, visits[j] * cfg.trajectories as u64);
            let fresh = family.estimate(inst, points, cfg.trajectories, &walk_cfg, keys)?;
            visits[j] += 1;
            report.walks += (points.len() * cfg.trajectories) as u64;
            report.truncated_walks += fresh.iter().map(PointEstimate::truncated).sum::<u64>();
            feature_rows(family, inst, points, &mut features);
            if cfg.caching {
                let keyed: Vec<(CacheKey, PointEstimate)> = fresh
                    .into_iter()
                    .enumerate()
                    .map(|(i, e)| ((j as u32, i as u32), e))
                    .collect();
                cache.register(keyed.iter().map(|(k, _)| *k));
                cache.update(&keyed)?;
                targets.extend(
                    keyed
                        .iter()
                        .map(|(k, _)| cache.target(*k).expect("registered")),
                );
            } else {
                targets.extend(fresh.iter().map(PointEstimate::mean));
            }
        }
        let (loss, grad) = model.loss_and_grad(&features, &targets)?;
        if !(loss <= DIVERGENCE_LOSS) {
            return Err(Error::Diverged { step, loss });
        }
        opt.step(model.params_mut(), &grad);
        report.history.push(StepLog {
            step,
            loss,
            lr: opt.lr,
            elapsed_s: start.elapsed().as_secs_f64(),
        });
        pass_loss += loss;
        if pos + 1 == steps_per_pass {
            opt.lr = sched.step(pass_loss / steps_per_pass as f64, opt.lr);
            pass_loss = 0.0;
        }
    }
    report.final_lr = opt.lr;
    Ok(report)
}

/// Training curve as CSV: `epoch,loss,lr,wall_clock_s`, one row per step.
pub fn write_history_csv<W: Write>(mut w: W, history: &[StepLog]) -> Result<()> {
    writeln!(w, "epoch,loss,lr,wall_clock_s")?;
    for h in history {
        writeln!(w, "{},{},{},{:.3}", h.step, h.loss, h.lr, h.elapsed_s)?;
    }
    Ok(())
}

/// Held-out instances with high-fidelity reference estimates.
#[derive(Debug, Clone)]
pub struct HeldOutSet<I, const D: usize> {
    pub instances: Vec<I>,
    pub points: Vec<Vec<Vector<D>>>,
    pub reference: Vec<Vec<PointEstimate>>,
    pub reference_trajectories: usize,
    pub seed: u64,
}

/// Instances and points are drawn from streams disjoint from any training
/// pool with the same seed.
pub fn held_out_set<const D: usize, F: OperatorFamily<D>>(
    family: &F,
    n_instances: usize,
    n_points: usize,
    reference_trajectories: usize,
    seed: u64,
) -> Result<HeldOutSet<F::Instance, D>> {
    let ids: Vec<u64> = (0..n_instances as u64).map(|j| HELD_OUT_BASE + j).collect();
    let instances = sample_pool(family, &ids, seed)?;
    let mut points = Vec::with_capacity(n_instances);
    let mut reference = Vec::with_capacity(n_instances);
    for (j, inst) in instances.iter().enumerate() {
        let id = HELD_OUT_BASE + j as u64;
        let mut rng: WalkRng = substream(seed, id, POINT_STREAM, 0);
        let pts = family.sample_points(inst, n_points, &mut rng)?;
        let cfg = family.walk_config(inst, seed);
        reference.push(family.estimate(
            inst,
            &pts,
            reference_trajectories,
            &cfg,
            EstimateKeys::new(id, 0),
        )?);
        points.push(pts);
    }
    Ok(HeldOutSet {
        instances,
        points,
        reference,
        reference_trajectories,
        seed,
    })
}

/// Errors against the reference, with the reference's own sampling variance
/// removed: `mse = raw − mean(SE_ref²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub points: usize,
    pub surrogate_mse: f64,
    pub surrogate_mse_raw: f64,
    /// Plain walk estimate with `baseline_trajectories` walks per point.
    pub baseline_mse: f64,
    pub baseline_mse_raw: f64,
    pub baseline_trajectories: usize,
    pub reference_variance: f64,
    /// `baseline_mse / surrogate_mse`
    pub ratio: f64,
}

pub fn evaluate<const D: usize, F: OperatorFamily<D>>(
    model: &Mlp,
    family: &F,
    set: &HeldOutSet<F::Instance, D>,
    baseline_trajectories: usize,
) -> Result<Evaluation> {
    check_model(model, family)?;
    let (mut s_err, mut b_err, mut ref_var, mut n) = (0.0, 0.0, 0.0, 0usize);
    let mut features = Vec::new();
    for (j, inst) in set.instances.iter().enumerate() {
        let id = HELD_OUT_BASE + j as u64;
        let pts = &set.points[j];
        features.clear();
        feature_rows(family, inst, pts, &mut features);
        let pred = model.predict_batch(&features)?;
        let cfg = family.walk_config(inst, set.seed);
        // Continue the reference's trajectory numbering so the draws are independent.
        let keys = EstimateKeys::new(id, set.reference_trajectories as u64);
        let base = family.estimate(inst, pts, baseline_trajectories, &cfg, keys)?;
        for ((r, p), b) in set.reference[j].iter().zip(&pred).zip(&base) {
            let truth = r.mean();
            s_err += (p - truth).powi(2);
            b_err += (b.mean() - truth).powi(2);
            ref_var += r.standard_error().unwrap_or(0.0).powi(2);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::InvalidConfig("held-out set is empty".into()));
    }
    let nf = n as f64;
    let ref_var = ref_var / nf;
    let surrogate_mse = s_err / nf - ref_var;
    let baseline_mse = b_err / nf - ref_var;
    Ok(Evaluation {
        points: n,
        surrogate_mse,
        surrogate_mse_raw: s_err / nf,
        baseline_mse,
        baseline_mse_raw: b_err / nf,
        baseline_trajectories,
        reference_variance: ref_var,
        ratio: baseline_mse / surrogate_mse,
    })
}
