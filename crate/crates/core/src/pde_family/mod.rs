//! Parametric PDE families: instance sampling, closed-form data and the
//! glue the training loop needs (features, point sets, estimators).

mod linear;
mod varying;

pub use linear::{
    eval_boundary_linear, eval_source_linear, sample_linear_instance, LinearInstance, LinearParams,
};
pub use varying::{
    absorption_majorant, eval_vc_fields, sample_vc_instance, screened_terms, VcFields, VcInstance,
    VcParams, SIGMA_BAR_FLOOR,
};

use std::fs;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{estimate, estimate_screened, EstimateKeys, PointEstimate};
use crate::geometry::{Domain, MeshDomain, PolarDomain};
use crate::rng::WalkRng;
use crate::vector::Vector;
use crate::walker::{FnProblem, WalkConfig};

/// Step limit for delta tracking, where most steps are short volume events.
pub const VC_MAX_STEPS: usize = 100_000;

/// A distribution over problem instances together with its walk estimator.
pub trait OperatorFamily<const D: usize>: Sync {
    type Instance: Send + Sync;

    fn name(&self) -> &'static str;
    /// Length of [`OperatorFamily::params`].
    fn param_count(&self) -> usize;
    fn sample_instance(&self, rng: &mut WalkRng) -> Result<Self::Instance>;
    fn params(&self, inst: &Self::Instance) -> Vec<f64>;
    fn domain<'a>(&self, inst: &'a Self::Instance) -> &'a dyn Domain<D>;
    fn walk_config(&self, inst: &Self::Instance, seed: u64) -> WalkConfig;
    fn estimate(
        &self,
        inst: &Self::Instance,
        points: &[Vector<D>],
        trajectories: usize,
        cfg: &WalkConfig,
        keys: EstimateKeys,
    ) -> Result<Vec<PointEstimate>>;
    fn record(&self, inst: &Self::Instance) -> InstanceRecord;

    fn feature_len(&self) -> usize {
        D + self.param_count()
    }

    /// Point coordinates followed by the instance parameters.
    fn features(&self, inst: &Self::Instance, x: &Vector<D>) -> Vec<f64> {
        let mut v = x.to_vec();
        v.extend(self.params(inst));
        v
    }

    fn sample_points(
        &self,
        inst: &Self::Instance,
        n: usize,
        rng: &mut WalkRng,
    ) -> Result<Vec<Vector<D>>> {
        self.domain(inst).sample_interior(n, rng)
    }
}

/// Linear Poisson family on polar domains.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearFamily;

impl OperatorFamily<2> for LinearFamily {
    type Instance = LinearInstance;

    fn name(&self) -> &'static str {
        "linear"
    }

    fn param_count(&self) -> usize {
        LinearParams::COUNT
    }

    fn sample_instance(&self, rng: &mut WalkRng) -> Result<LinearInstance> {
        sample_linear_instance(rng)
    }

    fn params(&self, inst: &LinearInstance) -> Vec<f64> {
        inst.params.to_vec()
    }

    fn domain<'a>(&self, inst: &'a LinearInstance) -> &'a dyn Domain<2> {
        inst.domain()
    }

    fn walk_config(&self, inst: &LinearInstance, seed: u64) -> WalkConfig {
        WalkConfig::for_domain(inst.domain(), seed)
    }

    fn estimate(
        &self,
        inst: &LinearInstance,
        points: &[Vector<2>],
        trajectories: usize,
        cfg: &WalkConfig,
        keys: EstimateKeys,
    ) -> Result<Vec<PointEstimate>> {
        estimate(inst, points, trajectories, cfg, keys)
    }

    fn record(&self, inst: &LinearInstance) -> InstanceRecord {
        InstanceRecord::Linear(inst.params)
    }
}

/// `Δu = 0`, `u = c` on the unit disk with `c ∼ U(−1, 1)`: exact zero-variance
/// targets, useful for checking the training loop in isolation.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantFamily;

fn unit_disk() -> &'static PolarDomain {
    static DISK: OnceLock<PolarDomain> = OnceLock::new();
    DISK.get_or_init(PolarDomain::unit_disk)
}

impl OperatorFamily<2> for ConstantFamily {
    type Instance = f64;

    fn name(&self) -> &'static str {
        "constant"
    }

    fn param_count(&self) -> usize {
        1
    }

    fn sample_instance(&self, rng: &mut WalkRng) -> Result<f64> {
        Ok(rng.random_range(-1.0..1.0))
    }

    fn params(&self, c: &f64) -> Vec<f64> {
        vec![*c]
    }

    fn domain<'a>(&self, _: &'a f64) -> &'a dyn Domain<2> {
        unit_disk()
    }

    fn walk_config(&self, _: &f64, seed: u64) -> WalkConfig {
        WalkConfig::for_domain(unit_disk(), seed)
    }

    fn estimate(
        &self,
        c: &f64,
        points: &[Vector<2>],
        trajectories: usize,
        cfg: &WalkConfig,
        keys: EstimateKeys,
    ) -> Result<Vec<PointEstimate>> {
        let c = *c;
        let problem = FnProblem::laplace(unit_disk(), move |_: &[f64]| c);
        estimate(&problem, points, trajectories, cfg, keys)
    }

    fn record(&self, c: &f64) -> InstanceRecord {
        InstanceRecord::Constant { c: *c }
    }
}

/// Varying-coefficient family on one shared mesh.
#[derive(Debug, Clone)]
pub struct VcFamily {
    mesh: Arc<MeshDomain>,
    mesh_ref: String,
}

impl VcFamily {
    /// `mesh_ref` is `builtin:cube`, `builtin:icosphere` or an OBJ path.
    pub fn new(mesh_ref: &str) -> Result<Self> {
        Ok(Self {
            mesh: Arc::new(load_mesh(mesh_ref)?),
            mesh_ref: mesh_ref.to_string(),
        })
    }

    pub fn mesh(&self) -> &Arc<MeshDomain> {
        &self.mesh
    }
}

impl OperatorFamily<3> for VcFamily {
    type Instance = VcInstance;

    fn name(&self) -> &'static str {
        "vc"
    }

    fn param_count(&self) -> usize {
        VcParams::COUNT
    }

    fn sample_instance(&self, rng: &mut WalkRng) -> Result<VcInstance> {
        sample_vc_instance(rng, self.mesh.clone())
    }

    fn params(&self, inst: &VcInstance) -> Vec<f64> {
        inst.params.to_vec()
    }

    fn domain<'a>(&self, inst: &'a VcInstance) -> &'a dyn Domain<3> {
        &**inst.mesh()
    }

    fn walk_config(&self, inst: &VcInstance, seed: u64) -> WalkConfig {
        let mut cfg = WalkConfig::for_domain(&*self.mesh, seed).with_sigma_bar(inst.sigma_bar);
        cfg.max_steps = VC_MAX_STEPS;
        cfg
    }

    fn estimate(
        &self,
        inst: &VcInstance,
        points: &[Vector<3>],
        trajectories: usize,
        cfg: &WalkConfig,
        keys: EstimateKeys,
    ) -> Result<Vec<PointEstimate>> {
        estimate_screened(inst, points, trajectories, cfg, keys)
    }

    fn record(&self, inst: &VcInstance) -> InstanceRecord {
        InstanceRecord::Vc {
            mesh: self.mesh_ref.clone(),
            params: inst.params,
        }
    }
}

/// Resolves a mesh reference.
pub fn load_mesh(reference: &str) -> Result<MeshDomain> {
    match reference {
        "builtin:cube" => Ok(MeshDomain::unit_cube()),
        "builtin:icosphere" => Ok(MeshDomain::icosphere(0.5, 3)),
        path => MeshDomain::load_obj(path),
    }
}

/// Serialized form of one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum InstanceRecord {
    Linear(LinearParams),
    Constant { c: f64 },
    Vc { mesh: String, params: VcParams },
}

/// Index of a directory of instance files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub version: String,
    pub family: String,
    pub seed: u64,
    pub instances: Vec<String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes `instance_NNNNN.json` files and `manifest.json` into `dir`.
pub fn write_dataset(
    dir: &Path,
    family: &str,
    seed: u64,
    records: &[InstanceRecord],
) -> Result<DatasetManifest> {
    fs::create_dir_all(dir)?;
    let mut instances = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        let name = format!("instance_{i:05}.json");
        fs::write(dir.join(&name), serde_json::to_string_pretty(r)?)?;
        instances.push(name);
    }
    let manifest = DatasetManifest {
        version: crate::VERSION.to_string(),
        family: family.to_string(),
        seed,
        instances,
    };
    fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

pub fn read_dataset(dir: &Path) -> Result<(DatasetManifest, Vec<InstanceRecord>)> {
    let manifest: DatasetManifest =
        serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
    let records = manifest
        .instances
        .iter()
        .map(|name| {
            if name.contains('/') || name.contains("..") {
                return Err(Error::Format(format!(
                    "instance path escapes dataset: {name}"
                )));
            }
            Ok(serde_json::from_str(&fs::read_to_string(dir.join(name))?)?)
        })
        .collect::<Result<_>>()?;
    Ok((manifest, records))
}
