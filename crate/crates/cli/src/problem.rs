//! Problem, domain and point-set descriptions shared by `solve` and `bench`.

use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use wosno::estimator::write_estimates_csv;
use wosno::geometry::DomainSpec;
use wosno::pde_family::{
    load_mesh, InstanceRecord, LinearInstance, LinearParams, VcInstance, VcParams, VC_MAX_STEPS,
};
use wosno::rng::substream;
use wosno::walker::{
    FnProblem, PoissonProblem, ScreenedProblem, WalkConfig, DEFAULT_EPS_FRACTION, DEFAULT_MAX_STEPS,
};
use wosno::{
    estimate, estimate_screened, Ball, Domain, EstimateKeys, PointEstimate, PolarDomain, Vector,
};

use crate::error::{CliError, Result};

/// Stream id for randomly placed evaluation points.
const POINT_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProblemSpec {
    /// `Δu = source` with `u = boundary`, on the configured domain.
    Constant {
        #[serde(default)]
        source: f64,
        #[serde(default)]
        boundary: f64,
    },
    /// A linear-family instance on its own polar domain.
    Linear { params: LinearParams },
    /// A varying-coefficient instance on a mesh.
    Vc {
        #[serde(default = "default_mesh")]
        mesh: String,
        params: VcParams,
    },
    /// An instance record written by a dataset export.
    Instance { path: PathBuf },
}

fn default_mesh() -> String {
    "builtin:cube".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PointSpec {
    /// Cell centres of a `resolution^d` grid over the bounding box, kept when inside.
    Grid {
        resolution: usize,
    },
    /// Uniform interior samples.
    Random {
        count: usize,
    },
    List {
        points: Vec<Vec<f64>>,
    },
}

impl Default for PointSpec {
    fn default() -> Self {
        PointSpec::Grid { resolution: 32 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkOptions {
    /// Absolute ε-shell; defaults to `1e-3 ×` the domain scale.
    pub eps_shell: Option<f64>,
    /// Defaults to 1000, or 100000 for delta tracking.
    pub max_steps: Option<usize>,
    pub antithetic: bool,
    /// Overrides the per-instance majorant of varying-coefficient problems.
    pub sigma_bar: Option<f64>,
}

/// A resolved problem: dimension-erased access to its estimator.
pub trait FieldSolver: Send + Sync {
    fn dim(&self) -> usize;
    fn walk_config(&self) -> &WalkConfig;
    fn points(&self, spec: &PointSpec, seed: u64) -> Result<Vec<Vec<f64>>>;
    /// Centre of the bounding box.
    fn center(&self) -> Vec<f64>;
    fn estimate(
        &self,
        points: &[Vec<f64>],
        trajectories: usize,
        keys: EstimateKeys,
    ) -> Result<Vec<PointEstimate>>;
    fn write_csv(
        &self,
        w: &mut dyn Write,
        points: &[Vec<f64>],
        estimates: &[PointEstimate],
    ) -> Result<()>;
}

fn to_fixed<const D: usize>(points: &[Vec<f64>]) -> Result<Vec<Vector<D>>> {
    points
        .iter()
        .map(|p| {
            <Vector<D>>::try_from(p.as_slice()).map_err(|_| {
                CliError::Config(format!(
                    "point {p:?} has {} coordinates, domain is {D}D",
                    p.len()
                ))
            })
        })
        .collect()
}

fn grid_points<const D: usize>(domain: &dyn Domain<D>, resolution: usize) -> Result<Vec<Vec<f64>>> {
    if resolution == 0 {
        return Err(CliError::Config("points.resolution must be >= 1".into()));
    }
    let bbox = domain.bounding_box();
    let ext = bbox.extent();
    let total = resolution.pow(D as u32);
    let mut out = Vec::new();
    for idx in 0..total {
        let mut rest = idx;
        let p: Vector<D> = std::array::from_fn(|axis| {
            let i = rest % resolution;
            rest /= resolution;
            bbox.min[axis] + (i as f64 + 0.5) / resolution as f64 * ext[axis]
        });
        if domain.contains(&p) {
            out.push(p.to_vec());
        }
    }
    Ok(out)
}

fn select_points<const D: usize>(
    domain: &dyn Domain<D>,
    spec: &PointSpec,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    match spec {
        PointSpec::Grid { resolution } => grid_points(domain, *resolution),
        PointSpec::Random { count } => {
            let mut rng = substream(seed, 0, POINT_STREAM, 0);
            Ok(domain
                .sample_interior(*count, &mut rng)?
                .into_iter()
                .map(|p| p.to_vec())
                .collect())
        }
        PointSpec::List { points } => {
            to_fixed::<D>(points)?;
            Ok(points.clone())
        }
    }
}

fn write_rows<const D: usize>(
    w: &mut dyn Write,
    points: &[Vec<f64>],
    estimates: &[PointEstimate],
) -> Result<()> {
    let pts = to_fixed::<D>(points)?;
    let rows = pts
        .into_iter()
        .zip(estimates.iter().cloned())
        .map(|(p, e)| (None, p, e));
    Ok(write_estimates_csv(w, rows, false)?)
}

struct Plain<const D: usize, P> {
    problem: P,
    cfg: WalkConfig,
}

impl<const D: usize, P: PoissonProblem<D> + Send> FieldSolver for Plain<D, P> {
    fn dim(&self) -> usize {
        D
    }

    fn walk_config(&self) -> &WalkConfig {
        &self.cfg
    }

    fn points(&self, spec: &PointSpec, seed: u64) -> Result<Vec<Vec<f64>>> {
        select_points::<D>(self.problem.domain(), spec, seed)
    }

    fn center(&self) -> Vec<f64> {
        self.problem.domain().bounding_box().center().to_vec()
    }

    fn estimate(
        &self,
        points: &[Vec<f64>],
        trajectories: usize,
        keys: EstimateKeys,
    ) -> Result<Vec<PointEstimate>> {
        Ok(estimate(
            &self.problem,
            &to_fixed::<D>(points)?,
            trajectories,
            &self.cfg,
            keys,
        )?)
    }

    fn write_csv(
        &self,
        w: &mut dyn Write,
        points: &[Vec<f64>],
        estimates: &[PointEstimate],
    ) -> Result<()> {
        write_rows::<D>(w, points, estimates)
    }
}

struct Screened<P> {
    problem: P,
    cfg: WalkConfig,
}

impl<P: ScreenedProblem + Send> FieldSolver for Screened<P> {
    fn dim(&self) -> usize {
        3
    }

    fn walk_config(&self) -> &WalkConfig {
        &self.cfg
    }

    fn points(&self, spec: &PointSpec, seed: u64) -> Result<Vec<Vec<f64>>> {
        select_points::<3>(self.problem.domain(), spec, seed)
    }

    fn center(&self) -> Vec<f64> {
        self.problem.domain().bounding_box().center().to_vec()
    }

    fn estimate(
        &self,
        points: &[Vec<f64>],
        trajectories: usize,
        keys: EstimateKeys,
    ) -> Result<Vec<PointEstimate>> {
        Ok(estimate_screened(
            &self.problem,
            &to_fixed::<3>(points)?,
            trajectories,
            &self.cfg,
            keys,
        )?)
    }

    fn write_csv(
        &self,
        w: &mut dyn Write,
        points: &[Vec<f64>],
        estimates: &[PointEstimate],
    ) -> Result<()> {
        write_rows::<3>(w, points, estimates)
    }
}

fn walk_config<const D: usize>(
    domain: &dyn Domain<D>,
    opts: &WalkOptions,
    max_steps: usize,
    seed: u64,
) -> WalkConfig {
    let mut cfg = WalkConfig::new(
        opts.eps_shell
            .unwrap_or(DEFAULT_EPS_FRACTION * domain.scale()),
        opts.max_steps.unwrap_or(max_steps),
        seed,
    )
    .with_antithetic(opts.antithetic);
    cfg.sigma_bar = opts.sigma_bar;
    cfg
}

fn constant<const D: usize, Dm: Domain<D> + 'static>(
    domain: Dm,
    source: f64,
    boundary: f64,
    opts: &WalkOptions,
    seed: u64,
) -> Box<dyn FieldSolver> {
    let cfg = walk_config::<D>(&domain, opts, DEFAULT_MAX_STEPS, seed);
    let problem = FnProblem {
        domain,
        source: (source != 0.0).then_some(move |_: &[f64]| source),
        boundary: move |_: &[f64]| boundary,
    };
    Box::new(Plain::<D, _> { problem, cfg })
}

fn linear(params: LinearParams, opts: &WalkOptions, seed: u64) -> Result<Box<dyn FieldSolver>> {
    let inst = LinearInstance::new(params)?;
    let cfg = walk_config::<2>(inst.domain(), opts, DEFAULT_MAX_STEPS, seed);
    Ok(Box::new(Plain::<2, _> { problem: inst, cfg }))
}

fn varying(
    mesh: &str,
    params: VcParams,
    opts: &WalkOptions,
    seed: u64,
) -> Result<Box<dyn FieldSolver>> {
    let inst = VcInstance::new(params, Arc::new(load_mesh(mesh)?))?;
    let mut cfg = walk_config::<3>(&**inst.mesh(), opts, VC_MAX_STEPS, seed);
    cfg.sigma_bar = Some(opts.sigma_bar.unwrap_or(inst.sigma_bar));
    Ok(Box::new(Screened { problem: inst, cfg }))
}

fn no_domain(domain: &Option<DomainSpec>, kind: &str) -> Result<()> {
    match domain {
        None => Ok(()),
        Some(_) => Err(CliError::Config(format!(
            "`domain` must be omitted: {kind} problems carry their own"
        ))),
    }
}

/// Builds the estimator for `problem` on `domain` (the unit disk when absent).
pub fn build_solver(
    problem: &ProblemSpec,
    domain: &Option<DomainSpec>,
    opts: &WalkOptions,
    seed: u64,
) -> Result<Box<dyn FieldSolver>> {
    match problem {
        ProblemSpec::Constant { source, boundary } => {
            let (s, b) = (*source, *boundary);
            match domain.clone().unwrap_or(DomainSpec::Polar {
                r0: 1.0,
                c1: 0.0,
                c2: 0.0,
            }) {
                DomainSpec::Polar { r0, c1, c2 } => Ok(constant::<2, _>(
                    PolarDomain::new(r0, c1, c2)?,
                    s,
                    b,
                    opts,
                    seed,
                )),
                DomainSpec::Ball { dim: 2, radius } => Ok(constant::<2, _>(
                    Ball::new([0.0; 2], radius)?,
                    s,
                    b,
                    opts,
                    seed,
                )),
                DomainSpec::Ball { dim: 3, radius } => Ok(constant::<3, _>(
                    Ball::new([0.0; 3], radius)?,
                    s,
                    b,
                    opts,
                    seed,
                )),
                DomainSpec::Ball { dim, .. } => Err(wosno::Error::UnsupportedDimension(dim).into()),
                DomainSpec::Mesh { path } => {
                    Ok(constant::<3, _>(load_mesh(&path)?, s, b, opts, seed))
                }
            }
        }
        ProblemSpec::Linear { params } => {
            no_domain(domain, "linear")?;
            linear(*params, opts, seed)
        }
        ProblemSpec::Vc { mesh, params } => {
            no_domain(domain, "vc")?;
            varying(mesh, *params, opts, seed)
        }
        ProblemSpec::Instance { path } => {
            no_domain(domain, "instance")?;
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let record: InstanceRecord = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            match record {
                InstanceRecord::Linear(params) => linear(params, opts, seed),
                InstanceRecord::Constant { c } => Ok(constant::<2, _>(
                    PolarDomain::unit_disk(),
                    0.0,
                    c,
                    opts,
                    seed,
                )),
                InstanceRecord::Vc { mesh, params } => varying(&mesh, params, opts, seed),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_disk(boundary: f64) -> Box<dyn FieldSolver> {
        let p = ProblemSpec::Constant {
            source: 0.0,
            boundary,
        };
        build_solver(&p, &None, &WalkOptions::default(), 0).unwrap()
    }

    #[test]
    fn grid_keeps_interior_cell_centres() {
        let p = ProblemSpec::Constant {
            source: 0.0,
            boundary: 1.0,
        };
        let d = Some(DomainSpec::Ball {
            dim: 2,
            radius: 1.0,
        });
        let s = build_solver(&p, &d, &WalkOptions::default(), 0).unwrap();
        let pts = s.points(&PointSpec::Grid { resolution: 10 }, 0).unwrap();
        // Cell centres of a 10×10 grid over [−1, 1]² inside the unit circle.
        let expected = (0..100)
            .filter(|i| {
                let (x, y) = (-0.9 + 0.2 * (i % 10) as f64, -0.9 + 0.2 * (i / 10) as f64);
                x * x + y * y < 1.0
            })
            .count();
        assert_eq!(pts.len(), expected);
    }

    #[test]
    fn random_points_are_seeded() {
        let s = constant_disk(1.0);
        let a = s.points(&PointSpec::Random { count: 5 }, 1).unwrap();
        assert_eq!(a, s.points(&PointSpec::Random { count: 5 }, 1).unwrap());
        assert_ne!(a, s.points(&PointSpec::Random { count: 5 }, 2).unwrap());
    }

    #[test]
    fn wrong_point_dimension_is_a_config_error() {
        let s = constant_disk(1.0);
        let spec = PointSpec::List {
            points: vec![vec![0.0, 0.0, 0.0]],
        };
        assert!(matches!(s.points(&spec, 0), Err(CliError::Config(_))));
    }

    #[test]
    fn constant_boundary_is_exact() {
        let s = constant_disk(0.75);
        let pts = s.points(&PointSpec::Grid { resolution: 4 }, 0).unwrap();
        let est = s.estimate(&pts, 16, EstimateKeys::default()).unwrap();
        assert!(est.iter().all(|e| e.mean() == 0.75));
    }

    #[test]
    fn problems_with_own_domain_reject_one() {
        let p = ProblemSpec::Vc {
            mesh: default_mesh(),
            params: VcParams {
                phi: 1.0,
                a_min: 0.2,
                a_max: 0.5,
            },
        };
        let d = Some(DomainSpec::Ball {
            dim: 3,
            radius: 1.0,
        });
        assert!(matches!(
            build_solver(&p, &d, &WalkOptions::default(), 0),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn vc_solver_uses_delta_tracking_defaults() {
        let p = ProblemSpec::Vc {
            mesh: default_mesh(),
            params: VcParams {
                phi: 1.0,
                a_min: 0.2,
                a_max: 0.5,
            },
        };
        let s = build_solver(&p, &None, &WalkOptions::default(), 0).unwrap();
        assert_eq!(s.dim(), 3);
        assert_eq!(s.walk_config().max_steps, VC_MAX_STEPS);
        assert!(s.walk_config().sigma_bar.unwrap() >= 1.0);
        assert_eq!(s.center(), vec![0.5; 3]);
    }

    #[test]
    fn unsupported_ball_dimension() {
        let p = ProblemSpec::Constant {
            source: 1.0,
            boundary: 0.0,
        };
        let d = Some(DomainSpec::Ball {
            dim: 4,
            radius: 1.0,
        });
        assert!(build_solver(&p, &d, &WalkOptions::default(), 0).is_err());
    }
}
