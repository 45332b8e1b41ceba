//! Domains, distance-to-boundary queries and point sampling.

mod ball;
pub mod bvh;
pub mod mesh;
pub mod polar;

pub use ball::Ball;
pub use mesh::MeshDomain;
pub use polar::PolarDomain;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::{Aabb, Vector};

/// Rejection sampling gives up once this many candidates were drawn...
pub const REJECTION_CANDIDATE_LIMIT: u64 = 10_000_000;
/// ...with an acceptance rate below this.
pub const REJECTION_MIN_ACCEPTANCE: f64 = 1e-4;

/// Result of a closest-boundary-point query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryQuery<const D: usize> {
    pub closest: Vector<D>,
    pub distance: f64,
    /// Strictly interior.
    pub inside: bool,
}

pub trait Domain<const D: usize>: Send + Sync {
    /// Closest boundary point, unsigned distance and inside flag in one pass.
    fn query(&self, p: &Vector<D>) -> BoundaryQuery<D>;

    fn bounding_box(&self) -> Aabb<D>;

    fn sample_boundary(&self, n: usize, rng: &mut dyn RngCore) -> Result<Vec<Vector<D>>>;

    fn contains(&self, p: &Vector<D>) -> bool {
        self.query(p).inside
    }

    fn distance_to_boundary(&self, p: &Vector<D>) -> Result<f64> {
        let q = self.query(p);
        if q.inside {
            Ok(q.distance)
        } else {
            Err(Error::ExteriorQuery(p.to_vec()))
        }
    }

    /// Uniform interior points by rejection from the bounding box.
    fn sample_interior(&self, n: usize, rng: &mut dyn RngCore) -> Result<Vec<Vector<D>>> {
        rejection_sample(self, n, rng).map(|(pts, _)| pts)
    }

    /// Characteristic length used to scale tolerances (half the bbox diagonal).
    fn scale(&self) -> f64 {
        self.bounding_box().half_diagonal()
    }
}

macro_rules! forward_domain {
    ($($ptr:ty),*) => {$(
        impl<const D: usize, T: Domain<D> + ?Sized> Domain<D> for $ptr {
            fn query(&self, p: &Vector<D>) -> BoundaryQuery<D> {
                (**self).query(p)
            }

            fn bounding_box(&self) -> Aabb<D> {
                (**self).bounding_box()
            }

            fn sample_boundary(&self, n: usize, rng: &mut dyn RngCore) -> Result<Vec<Vector<D>>> {
                (**self).sample_boundary(n, rng)
            }

            fn sample_interior(&self, n: usize, rng: &mut dyn RngCore) -> Result<Vec<Vector<D>>> {
                (**self).sample_interior(n, rng)
            }

            fn scale(&self) -> f64 {
                (**self).scale()
            }
        }
    )*};
}

forward_domain!(&T, std::sync::Arc<T>, Box<T>);

/// Rejection sampler statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RejectionStats {
    pub candidates: u64,
    pub accepted: u64,
}

impl RejectionStats {
    pub fn acceptance(&self) -> f64 {
        if self.candidates == 0 {
            0.0
        } else {
            self.accepted as f64 / self.candidates as f64
        }
    }
}

/// Draws `n` interior points uniformly from the domain's bounding box.
pub fn rejection_sample<const D: usize, Dm: Domain<D> + ?Sized>(
    domain: &Dm,
    n: usize,
    rng: &mut dyn RngCore,
) -> Result<(Vec<Vector<D>>, RejectionStats)> {
    let bbox = domain.bounding_box();
    let mut out = Vec::with_capacity(n);
    let mut stats = RejectionStats {
        candidates: 0,
        accepted: 0,
    };
    while out.len() < n {
        let p: Vector<D> = std::array::from_fn(|i| {
            bbox.min[i] + (bbox.max[i] - bbox.min[i]) * rng.random::<f64>()
        });
        stats.candidates += 1;
        if domain.contains(&p) {
            stats.accepted += 1;
            out.push(p);
        }
        if stats.candidates >= REJECTION_CANDIDATE_LIMIT
            && stats.acceptance() < REJECTION_MIN_ACCEPTANCE
        {
            return Err(Error::DegenerateDomain {
                candidates: stats.candidates,
                rate: stats.acceptance(),
            });
        }
    }
    Ok((out, stats))
}

/// JSON description of a domain: `{"kind": "polar", "r0", "c1", "c2"}`,
/// `{"kind": "mesh", "path"}` or `{"kind": "ball", "dim", "radius"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DomainSpec {
    Polar {
        #[serde(default = "one")]
        r0: f64,
        #[serde(default)]
        c1: f64,
        #[serde(default)]
        c2: f64,
    },
    Mesh {
        path: String,
    },
    Ball {
        dim: usize,
        #[serde(default = "one")]
        radius: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl DomainSpec {
    pub fn dimension(&self) -> usize {
        match self {
            DomainSpec::Polar { .. } => 2,
            DomainSpec::Mesh { .. } => 3,
            DomainSpec::Ball { dim, .. } => *dim,
        }
    }
}
