//! Grid-free Monte Carlo solvers for Poisson-family boundary value problems.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: domains with distance-to-boundary queries (parametric polar
//!   curves, triangle meshes behind a BVH, analytic balls, pixel masks).
//! - [`greens`]: closed-form ball Green's functions, harmonic and screened.
//! - [`walker`]: single-trajectory Walk-on-Spheres and delta-tracking estimators.
//! - [`estimator`]: L-trajectory averaging, exact running statistics and the
//!   cross-epoch target cache.
//! - [`pde_family`]: the parametric problem families used for training.
//! - [`surrogate`]: a small MLP regressed against noisy walk estimates.
//! - [`inpaint`]: harmonic and biharmonic image inpainting on masked pixels.

pub mod error;
pub mod estimator;
pub mod geometry;
pub mod greens;
pub mod inpaint;
pub mod pde_family;
pub mod rng;
pub mod surrogate;
pub mod vector;
pub mod walker;

pub use error::{Error, Result};
pub use estimator::{estimate, estimate_screened, EstimateCache, EstimateKeys, PointEstimate};
pub use geometry::{Ball, BoundaryQuery, Domain, MeshDomain, PolarDomain};
pub use vector::{Aabb, Vector};
pub use walker::{
    walk_poisson, walk_poisson_antithetic, walk_screened_delta, PoissonProblem, ScreenedProblem,
    Termination, TrajectoryResult, WalkConfig,
};

/// Crate version, stamped into every artifact header.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
