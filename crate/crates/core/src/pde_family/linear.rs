//! Linear Poisson family `Δu = f` on star-shaped polar domains.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PolarDomain;
use crate::vector::Vector;
use crate::walker::PoissonProblem;

pub const SHAPE_RANGE: f64 = 0.2;
pub const CENTER_RANGE: f64 = 0.5;
pub const AMPLITUDE_RANGE: f64 = 1.0;
pub const BOUNDARY_RANGE: f64 = 1.0;

/// Scalar parameters of one instance. Field order is the feature order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearParams {
    pub c1: f64,
    pub c2: f64,
    pub beta: [f64; 2],
    pub mu: [[f64; 2]; 2],
    pub b: [f64; 5],
}

impl LinearParams {
    pub const COUNT: usize = 13;

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.c1, self.c2, self.beta[0], self.beta[1]];
        v.extend(self.mu.iter().flatten());
        v.extend(self.b);
        v
    }

    pub fn validate(&self) -> Result<()> {
        if !self.to_vec().iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidConfig(
                "linear instance has non-finite parameters".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LinearInstance {
    pub params: LinearParams,
    domain: PolarDomain,
}

impl LinearInstance {
    pub fn new(params: LinearParams) -> Result<Self> {
        params.validate()?;
        let domain = PolarDomain::new(1.0, params.c1, params.c2)?;
        Ok(Self { params, domain })
    }

    pub fn domain(&self) -> &PolarDomain {
        &self.domain
    }
}

/// `c ∼ U(−0.2, 0.2)²`, `β ∼ U(−1, 1)²`, `μ ∼ U([−0.5, 0.5]²)²`, `b ∼ U(−1, 1)⁵`.
pub fn sample_linear_instance<R: RngCore + ?Sized>(rng: &mut R) -> Result<LinearInstance> {
    let mut u = |a: f64| rng.random_range(-a..a);
    let c1 = u(SHAPE_RANGE);
    let c2 = u(SHAPE_RANGE);
    let beta = [u(AMPLITUDE_RANGE), u(AMPLITUDE_RANGE)];
    let mu = [
        [u(CENTER_RANGE), u(CENTER_RANGE)],
        [u(CENTER_RANGE), u(CENTER_RANGE)],
    ];
    let b = [(); 5].map(|_| u(BOUNDARY_RANGE));
    LinearInstance::new(LinearParams {
        c1,
        c2,
        beta,
        mu,
        b,
    })
}

/// `g = b₀ + b₁cos θ + b₂sin θ + b₃cos 2θ + b₄sin 2θ`, `θ = atan2(x₁, x₀)`.
pub fn eval_boundary_linear(params: &LinearParams, x: &[f64]) -> f64 {
    let theta = x[1].atan2(x[0]);
    let (s, c) = theta.sin_cos();
    let b = &params.b;
    // cos 2θ = c² − s², sin 2θ = 2sc
    b[0] + b[1] * c + b[2] * s + b[3] * (c * c - s * s) + b[4] * (2.0 * s * c)
}

/// `f = Σᵢ βᵢ exp(−‖x − μᵢ‖²)`.
pub fn eval_source_linear(params: &LinearParams, x: &[f64]) -> f64 {
    params
        .beta
        .iter()
        .zip(&params.mu)
        .map(|(beta, mu)| {
            let d2 = (x[0] - mu[0]).powi(2) + (x[1] - mu[1]).powi(2);
            beta * (-d2).exp()
        })
        .sum()
}

impl PoissonProblem<2> for LinearInstance {
    type Domain = PolarDomain;

    fn domain(&self) -> &PolarDomain {
        &self.domain
    }

    fn source(&self, x: &Vector<2>) -> f64 {
        eval_source_linear(&self.params, x)
    }

    fn boundary(&self, x: &Vector<2>) -> f64 {
        eval_boundary_linear(&self.params, x)
    }

    fn has_source(&self) -> bool {
        self.params.beta != [0.0, 0.0]
    }
}
