#![allow(dead_code)]

use wosno::geometry::Ball;
use wosno::walker::{ScreenedProblem, ScreenedTerms};
use wosno::Vector;

/// `α ≡ 1` with constant absorption and source on the unit ball.
pub struct ConstScreened {
    pub ball: Ball<3>,
    pub sigma: f64,
    pub source: f64,
    pub boundary: f64,
}

impl ConstScreened {
    pub fn new(sigma: f64, source: f64, boundary: f64) -> Self {
        Self {
            ball: Ball::unit(),
            sigma,
            source,
            boundary,
        }
    }
}

impl ScreenedProblem for ConstScreened {
    type Domain = Ball<3>;

    fn domain(&self) -> &Ball<3> {
        &self.ball
    }

    fn sqrt_diffusion(&self, _: &Vector<3>) -> f64 {
        1.0
    }

    fn interior(&self, _: &Vector<3>) -> ScreenedTerms {
        ScreenedTerms {
            absorption: self.sigma,
            source: self.source,
        }
    }

    fn boundary(&self, _: &Vector<3>) -> f64 {
        self.boundary
    }
}

/// `|a − b| ≤ k·√(se_a² + se_b²)`
pub fn within_combined_se(a: f64, se_a: f64, b: f64, se_b: f64, k: f64) -> bool {
    (a - b).abs() <= k * se_a.hypot(se_b)
}

/// Sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Radial ODE solution of `u'' + 2u'/ρ = σu`, `u(1) = 1`, at the origin:
/// `√σ / sinh √σ`, obtained here by shooting with RK4 instead of the closed form.
pub fn screened_ball_center_value(sigma: f64) -> f64 {
    // w = ρu satisfies w'' = σw with w(0) = 0; integrate from w'(0) = 1.
    let n = 20_000;
    let h = 1.0 / n as f64;
    let (mut w, mut dw) = (0.0f64, 1.0f64);
    for _ in 0..n {
        let f = |w: f64, dw: f64| (dw, sigma * w);
        let k1 = f(w, dw);
        let k2 = f(w + 0.5 * h * k1.0, dw + 0.5 * h * k1.1);
        let k3 = f(w + 0.5 * h * k2.0, dw + 0.5 * h * k2.1);
        let k4 = f(w + h * k3.0, dw + h * k3.1);
        w += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        dw += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
    }
    // u(ρ) = w(ρ)/(ρ·w(1)); u(0) = w'(0)/w(1).
    1.0 / w
}
