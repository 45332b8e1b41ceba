//! L-trajectory estimates, running statistics and the cross-epoch cache.

mod cache;
mod exact_sum;

pub use cache::{running_average, CacheKey, EstimateCache};
pub use exact_sum::ExactSum;

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{StreamKey, WalkRng};
use crate::vector::Vector;
use crate::walker::{
    walk_poisson, walk_poisson_antithetic, walk_screened_delta, PoissonProblem, ScreenedProblem,
    Termination, TrajectoryResult, WalkConfig,
};

/// Trajectories per work item; fixed so results do not depend on worker count.
const CHUNK: usize = 512;

/// Running mean and variance of walk values at one point.
///
/// The mean comes from an exact sum; `m2` is accumulated Welford-style and
/// merged with Chan's formula.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointEstimate {
    sum: ExactSum,
    running_mean: f64,
    m2: f64,
    n_samples: u64,
    truncated: u64,
}

impl PointEstimate {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_values<I: IntoIterator<Item = f64>>(values: I) -> Self {
        let mut e = Self::new();
        values.into_iter().for_each(|v| e.push(v));
        e
    }

    pub fn push(&mut self, value: f64) {
        self.sum.add(value);
        self.n_samples += 1;
        let delta = value - self.running_mean;
        self.running_mean += delta / self.n_samples as f64;
        self.m2 += delta * (value - self.running_mean);
    }

    pub fn push_result(&mut self, r: &TrajectoryResult) {
        self.push(r.value);
        if r.terminated_by == Termination::MaxSteps {
            self.truncated += 1;
        }
    }

    pub fn merge(&mut self, other: &PointEstimate) {
        if other.n_samples == 0 {
            return;
        }
        if self.n_samples == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.n_samples as f64, other.n_samples as f64);
        let n = na + nb;
        let delta = other.running_mean - self.running_mean;
        self.m2 += other.m2 + delta * delta * na * nb / n;
        self.running_mean += delta * nb / n;
        self.n_samples += other.n_samples;
        self.truncated += other.truncated;
        self.sum.merge(&other.sum);
    }

    /// Arithmetic mean of all samples (0 when empty).
    pub fn mean(&self) -> f64 {
        if self.n_samples == 0 {
            0.0
        } else {
            self.sum.value() / self.n_samples as f64
        }
    }

    pub fn m2(&self) -> f64 {
        self.m2.max(0.0)
    }

    pub fn n_samples(&self) -> u64 {
        self.n_samples
    }

    /// Walks that hit the step limit instead of the ε-shell.
    pub fn truncated(&self) -> u64 {
        self.truncated
    }

    /// Unbiased sample variance; `None` below two samples.
    pub fn variance(&self) -> Option<f64> {
        (self.n_samples >= 2).then(|| self.m2() / (self.n_samples - 1) as f64)
    }

    /// Standard error of the mean.
    pub fn standard_error(&self) -> Option<f64> {
        self.variance().map(|v| (v / self.n_samples as f64).sqrt())
    }

    pub(crate) fn exact_sum(&self) -> &ExactSum {
        &self.sum
    }

    pub(crate) fn from_parts(
        sum: ExactSum,
        running_mean: f64,
        m2: f64,
        n_samples: u64,
        truncated: u64,
    ) -> Self {
        Self {
            sum,
            running_mean,
            m2,
            n_samples,
            truncated,
        }
    }

    pub(crate) fn running_mean(&self) -> f64 {
        self.running_mean
    }
}

/// Which random streams an estimate draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EstimateKeys {
    pub instance: u64,
    /// Global id of the first trajectory; later epochs continue the numbering.
    pub trajectory_offset: u64,
}

impl EstimateKeys {
    pub fn new(instance: u64, trajectory_offset: u64) -> Self {
        Self {
            instance,
            trajectory_offset,
        }
    }
}

trait Sampler<const D: usize>: Sync {
    fn one(&self, x: &Vector<D>, rng: &mut WalkRng) -> Result<TrajectoryResult>;
    fn pair(
        &self,
        x: &Vector<D>,
        rng: &mut WalkRng,
    ) -> Result<(TrajectoryResult, TrajectoryResult)>;
}

struct PoissonSampler<'a, P> {
    problem: &'a P,
    cfg: WalkConfig,
}

impl<const D: usize, P: PoissonProblem<D>> Sampler<D> for PoissonSampler<'_, P> {
    fn one(&self, x: &Vector<D>, rng: &mut WalkRng) -> Result<TrajectoryResult> {
        walk_poisson(self.problem, x, &self.cfg, rng)
    }

    fn pair(
        &self,
        x: &Vector<D>,
        rng: &mut WalkRng,
    ) -> Result<(TrajectoryResult, TrajectoryResult)> {
        walk_poisson_antithetic(self.problem, x, &self.cfg, rng)
    }
}

struct ScreenedSampler<'a, P> {
    problem: &'a P,
    cfg: WalkConfig,
}

impl<P: ScreenedProblem> Sampler<3> for ScreenedSampler<'_, P> {
    fn one(&self, x: &Vector<3>, rng: &mut WalkRng) -> Result<TrajectoryResult> {
        walk_screened_delta(self.problem, x, &self.cfg, rng)
    }

    fn pair(&self, _: &Vector<3>, _: &mut WalkRng) -> Result<(TrajectoryResult, TrajectoryResult)> {
        Err(Error::InvalidConfig(
            "antithetic pairing is only available for the plain walker".into(),
        ))
    }
}

/// Per-point mean and variance over `trajectories` independent walks.
///
/// Trajectory `t` of point `i` uses stream `(cfg.rng_seed, keys.instance, i,
/// keys.trajectory_offset + t)`. With `cfg.antithetic`, trajectories
/// `(2j, 2j+1)` form a mirrored pair driven by stream `2j`.
pub fn estimate<const D: usize, P: PoissonProblem<D>>(
    problem: &P,
    points: &[Vector<D>],
    trajectories: usize,
    cfg: &WalkConfig,
    keys: EstimateKeys,
) -> Result<Vec<PointEstimate>> {
    cfg.validate()?;
    run(
        &PoissonSampler { problem, cfg: *cfg },
        points,
        trajectories,
        cfg,
        keys,
    )
}

/// As [`estimate`], with the delta-tracking walker.
pub fn estimate_screened<P: ScreenedProblem>(
    problem: &P,
    points: &[Vector<3>],
    trajectories: usize,
    cfg: &WalkConfig,
    keys: EstimateKeys,
) -> Result<Vec<PointEstimate>> {
    cfg.validate()?;
    run(
        &ScreenedSampler { problem, cfg: *cfg },
        points,
        trajectories,
        cfg,
        keys,
    )
}

fn run<const D: usize, S: Sampler<D>>(
    sampler: &S,
    points: &[Vector<D>],
    trajectories: usize,
    cfg: &WalkConfig,
    keys: EstimateKeys,
) -> Result<Vec<PointEstimate>> {
    if trajectories == 0 {
        return Err(Error::InvalidConfig("need at least one trajectory".into()));
    }
    let chunks = trajectories.div_ceil(CHUNK);
    let partial: Vec<PointEstimate> = (0..points.len() * chunks)
        .into_par_iter()
        .map(|item| {
            let (i, c) = (item / chunks, item % chunks);
            let start = c * CHUNK;
            let end = ((c + 1) * CHUNK).min(trajectories);
            let stream = |t: usize| {
                StreamKey::new(
                    cfg.rng_seed,
                    keys.instance,
                    i as u64,
                    keys.trajectory_offset + t as u64,
                )
                .rng()
            };
            let mut est = PointEstimate::new();
            let mut t = start;
            while t < end {
                if cfg.antithetic && t + 1 < end {
                    let (a, b) = sampler.pair(&points[i], &mut stream(t))?;
                    est.push_result(&a);
                    est.push_result(&b);
                    t += 2;
                } else {
                    est.push_result(&sampler.one(&points[i], &mut stream(t))?);
                    t += 1;
                }
            }
            Ok(est)
        })
        .collect::<Result<_>>()?;
    Ok(partial
        .chunks(chunks)
        .map(|cs| {
            cs.iter().fold(PointEstimate::new(), |mut acc, e| {
                acc.merge(e);
                acc
            })
        })
        .collect())
}

/// Runs `f` on a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// CSV rows `[instance_id,] coords..., mean, variance, n_samples`.
/// Variance is left empty below two samples.
pub fn write_estimates_csv<W: Write, const D: usize>(
    mut w: W,
    rows: impl IntoIterator<Item = (Option<u32>, Vector<D>, PointEstimate)>,
    with_instance: bool,
) -> Result<()> {
    let axes = ["x", "y", "z"];
    let mut header: Vec<String> = Vec::new();
    if with_instance {
        header.push("instance_id".into());
    }
    header.extend((0..D).map(|i| axes.get(i).map_or(format!("x{i}"), |s| s.to_string())));
    header.extend(["mean", "variance", "n_samples"].map(String::from));
    writeln!(w, "{}", header.join(","))?;
    for (inst, p, e) in rows {
        let mut fields: Vec<String> = Vec::with_capacity(D + 4);
        if with_instance {
            fields.push(inst.unwrap_or(0).to_string());
        }
        fields.extend(p.iter().map(|c| c.to_string()));
        fields.push(e.mean().to_string());
        fields.push(e.variance().map_or(String::new(), |v| v.to_string()));
        fields.push(e.n_samples().to_string());
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}
