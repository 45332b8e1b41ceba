//! Varying-coefficient family `∇·(α∇u) − σu = −f` on triangle meshes, with a
//! manufactured solution `u = g`.
//!
//! With `h = ln α` the substitution `U = √α u` gives the screened problem
//! `ΔU − σ'U = −f'`, where `σ' = σ/α + ½Δh + ¼|∇h|²` and `f' = f/√α`.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::MeshDomain;
use crate::rng::substream;
use crate::vector::{Aabb, Vector};
use crate::walker::{ScreenedProblem, ScreenedTerms};

pub const PHI_RANGE: (f64, f64) = (0.5, 1.5);
pub const A_MIN_RANGE: (f64, f64) = (0.1, 1.0);
/// `A_max − A_min` range.
pub const A_SPAN_RANGE: (f64, f64) = (0.0, 1.0);
/// Lower bound on the majorant so nearly-unscreened instances still walk.
pub const SIGMA_BAR_FLOOR: f64 = 1.0;
pub const MAJORANT_PROBES: usize = 10_000;
pub const MAJORANT_MARGIN: f64 = 1.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VcParams {
    pub phi: f64,
    pub a_min: f64,
    pub a_max: f64,
}

impl VcParams {
    pub const COUNT: usize = 3;

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.phi, self.a_min, self.a_max]
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.phi.is_finite()
            && self.a_min > 0.0
            && self.a_max >= self.a_min
            && self.a_max.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "need finite phi and 0 < a_min <= a_max, got {self:?}"
            )))
        }
    }
}

/// Coefficients and data at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VcFields {
    pub alpha: f64,
    pub grad_alpha: Vector<3>,
    pub lap_alpha: f64,
    pub sigma: f64,
    pub g: f64,
    pub f: f64,
}

struct LogAlpha {
    h: f64,
    grad: [f64; 2],
    lap: f64,
}

fn log_alpha(p: &VcParams, x: &[f64]) -> LogAlpha {
    let a = 4.0 * PI * p.phi;
    let b = 3.0 * PI * p.phi;
    let (sa, ca) = (a * x[0]).sin_cos();
    let (sb, cb) = (b * x[1]).sin_cos();
    LogAlpha {
        h: -x[1] * x[1] + ca * sb,
        grad: [-a * sa * sb, -2.0 * x[1] + b * ca * cb],
        lap: -2.0 - (a * a + b * b) * ca * sb,
    }
}

/// `g`, `∇g`, `Δg` of the manufactured solution.
fn solution(p: &VcParams, x: &[f64]) -> (f64, Vector<3>, f64) {
    let q = PI * p.phi;
    let (s0, c0) = (q * x[0]).sin_cos();
    let (s1, c1) = (2.0 * q * x[1]).sin_cos();
    let s2 = (3.0 * q * x[2]).sin();
    let g = s0 * c1 + (1.0 - c0) * (1.0 - s1) + s2 * s2;
    let grad = [
        q * c0 * c1 + q * s0 * (1.0 - s1),
        -2.0 * q * s0 * s1 - 2.0 * q * (1.0 - c0) * c1,
        3.0 * q * (6.0 * q * x[2]).sin(),
    ];
    let lap = (-q * q * s0 * c1 + q * q * c0 * (1.0 - s1))
        + (-4.0 * q * q * s0 * c1 + 4.0 * q * q * (1.0 - c0) * s1)
        + 18.0 * q * q * (6.0 * q * x[2]).cos();
    (g, grad, lap)
}

fn sigma(p: &VcParams, x: &[f64]) -> f64 {
    p.a_min + (p.a_max - p.a_min) * (1.0 + 0.5 * (2.0 * PI * x[0]).sin() * (0.5 * PI * x[1]).cos())
}

/// All coefficient fields in closed form; `f` makes `u = g` exact.
pub fn eval_vc_fields(p: &VcParams, x: &[f64]) -> VcFields {
    let la = log_alpha(p, x);
    let alpha = la.h.exp();
    let grad_alpha = [alpha * la.grad[0], alpha * la.grad[1], 0.0];
    let grad_h2 = la.grad[0] * la.grad[0] + la.grad[1] * la.grad[1];
    let lap_alpha = alpha * (la.lap + grad_h2);
    let sigma = sigma(p, x);
    let (g, grad_g, lap_g) = solution(p, x);
    let flux = grad_alpha[0] * grad_g[0] + grad_alpha[1] * grad_g[1];
    VcFields {
        alpha,
        grad_alpha,
        lap_alpha,
        sigma,
        g,
        f: -alpha * lap_g - flux + sigma * g,
    }
}

/// `σ'` and `f'` of the screened form.
pub fn screened_terms(p: &VcParams, x: &[f64]) -> ScreenedTerms {
    let la = log_alpha(p, x);
    let alpha = la.h.exp();
    let grad_h2 = la.grad[0] * la.grad[0] + la.grad[1] * la.grad[1];
    let fields = eval_vc_fields(p, x);
    ScreenedTerms {
        absorption: fields.sigma / alpha + 0.5 * la.lap + 0.25 * grad_h2,
        source: fields.f / alpha.sqrt(),
    }
}

/// `MAJORANT_MARGIN ×` the largest `σ'` found over `bbox`, floored at
/// [`SIGMA_BAR_FLOOR`].
///
/// Uniform probes locate candidate maxima, which are then polished by a
/// shrinking pattern search so the margin is not spent on probe spacing.
pub fn absorption_majorant(p: &VcParams, bbox: &Aabb<3>) -> f64 {
    let eval = |x: &Vector<3>| screened_terms(p, x).absorption;
    let mut rng = substream(0x5157_A11A, 0, 0, 0);
    let mut probes: Vec<(f64, Vector<3>)> = (0..MAJORANT_PROBES)
        .map(|_| {
            let x: Vector<3> = std::array::from_fn(|i| {
                bbox.min[i] + (bbox.max[i] - bbox.min[i]) * rng.random::<f64>()
            });
            (eval(&x), x)
        })
        .collect();
    probes.sort_by(|a, b| b.0.total_cmp(&a.0));
    let spacing =
        bbox.extent().iter().cloned().fold(0.0, f64::max) / (MAJORANT_PROBES as f64).cbrt();
    let mut best = probes[0].0;
    for &(mut v, mut x) in probes.iter().take(16) {
        let mut step = spacing;
        while step > 1e-6 * spacing {
            let mut moved = false;
            for axis in 0..3 {
                for sgn in [-1.0, 1.0] {
                    let mut y = x;
                    y[axis] = (y[axis] + sgn * step).clamp(bbox.min[axis], bbox.max[axis]);
                    let vy = eval(&y);
                    if vy > v {
                        (v, x, moved) = (vy, y, true);
                    }
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        best = best.max(v);
    }
    (MAJORANT_MARGIN * best).max(SIGMA_BAR_FLOOR)
}

#[derive(Debug, Clone)]
pub struct VcInstance {
    pub params: VcParams,
    pub sigma_bar: f64,
    mesh: Arc<MeshDomain>,
}

impl VcInstance {
    pub fn new(params: VcParams, mesh: Arc<MeshDomain>) -> Result<Self> {
        params.validate()?;
        let sigma_bar =
            absorption_majorant(&params, &crate::geometry::Domain::bounding_box(&*mesh));
        Ok(Self {
            params,
            sigma_bar,
            mesh,
        })
    }

    pub fn mesh(&self) -> &Arc<MeshDomain> {
        &self.mesh
    }

    pub fn fields(&self, x: &Vector<3>) -> VcFields {
        eval_vc_fields(&self.params, x)
    }
}

/// `Φ ∼ U(0.5, 1.5)`, `A_min ∼ U(0.1, 1)`, `A_max − A_min ∼ U(0, 1)`.
pub fn sample_vc_instance<R: RngCore + ?Sized>(
    rng: &mut R,
    mesh: Arc<MeshDomain>,
) -> Result<VcInstance> {
    let phi = rng.random_range(PHI_RANGE.0..PHI_RANGE.1);
    let a_min = rng.random_range(A_MIN_RANGE.0..A_MIN_RANGE.1);
    let a_max = a_min + rng.random_range(A_SPAN_RANGE.0..A_SPAN_RANGE.1);
    VcInstance::new(VcParams { phi, a_min, a_max }, mesh)
}

impl ScreenedProblem for VcInstance {
    type Domain = MeshDomain;

    fn domain(&self) -> &MeshDomain {
        &self.mesh
    }

    fn sqrt_diffusion(&self, x: &Vector<3>) -> f64 {
        (0.5 * log_alpha(&self.params, x).h).exp()
    }

    fn interior(&self, x: &Vector<3>) -> ScreenedTerms {
        screened_terms(&self.params, x)
    }

    fn boundary(&self, x: &Vector<3>) -> f64 {
        self.sqrt_diffusion(x) * solution(&self.params, x).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: VcParams = VcParams {
        phi: 0.8,
        a_min: 0.3,
        a_max: 0.9,
    };

    #[test]
    fn origin_values() {
        for phi in [0.5, 1.0, 1.37] {
            let f = eval_vc_fields(&VcParams { phi, ..P }, &[0.0; 3]);
            assert_eq!(f.alpha, 1.0);
            assert_eq!(f.g, 0.0);
        }
    }

    #[test]
    fn sigma_stays_above_a_min() {
        let mut rng = substream(2, 0, 0, 0);
        for _ in 0..1000 {
            let x: [f64; 3] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
            let s = eval_vc_fields(&P, &x).sigma;
            assert!((P.a_min..=P.a_min + 1.5 * (P.a_max - P.a_min)).contains(&s));
        }
    }

    #[test]
    fn majorant_bounds_dense_grid() {
        let bbox = Aabb {
            min: [0.0; 3],
            max: [1.0; 3],
        };
        for phi in [0.5, 1.0, 1.5] {
            let p = VcParams { phi, ..P };
            let bar = absorption_majorant(&p, &bbox);
            let n = 60;
            let mut worst = f64::NEG_INFINITY;
            for i in 0..=n {
                for j in 0..=n {
                    let x = [i as f64 / n as f64, j as f64 / n as f64, 0.5];
                    worst = worst.max(screened_terms(&p, &x).absorption);
                }
            }
            assert!(worst < bar, "phi {phi}: grid max {worst} vs majorant {bar}");
        }
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(VcParams { a_min: 0.0, ..P }.validate().is_err());
        assert!(VcParams { a_max: 0.1, ..P }.validate().is_err());
    }
}
