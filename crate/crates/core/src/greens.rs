//! Ball Green's functions and exit masses.
//!
//! Harmonic kernels are for the operator `Δ` on a ball of radius `r`, with the
//! evaluation point measured from the centre: `G_r(ρ)` vanishes on the sphere
//! and integrates to `r²/(2d)`. Screened kernels (3D only) are for `Δ − σ̄`,
//! built from the radial solutions `sinh(√σ̄ ρ)/ρ`.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::uniform_direction;
use crate::vector::{scale, Vector};

/// Volume of the `d`-ball of radius `r` (d = 2 or 3).
#[inline]
pub fn ball_volume(d: usize, r: f64) -> f64 {
    match d {
        2 => PI * r * r,
        3 => 4.0 / 3.0 * PI * r * r * r,
        _ => {
            let n = d as f64;
            PI.powf(n / 2.0) / gamma_half_integer(d + 2) * r.powi(d as i32)
        }
    }
}

/// Γ(k/2) for positive integer `k`.
fn gamma_half_integer(k: usize) -> f64 {
    if k == 1 {
        PI.sqrt()
    } else if k == 2 {
        1.0
    } else {
        (k as f64 / 2.0 - 1.0) * gamma_half_integer(k - 2)
    }
}

/// Harmonic ball Green's function `G_r` at distance `rho` from the centre.
pub fn greens_ball(d: usize, r: f64, rho: f64) -> Result<f64> {
    if rho <= 0.0 {
        return Err(Error::SingularQuery);
    }
    match d {
        2 => Ok(greens_ball_2d(r, rho)),
        3 => Ok(greens_ball_3d(r, rho)),
        _ => Err(Error::UnsupportedDimension(d)),
    }
}

#[inline]
pub(crate) fn greens_ball_2d(r: f64, rho: f64) -> f64 {
    (r / rho).ln() / (2.0 * PI)
}

#[inline]
pub(crate) fn greens_ball_3d(r: f64, rho: f64) -> f64 {
    (1.0 / rho - 1.0 / r) / (4.0 * PI)
}

/// `∫_{B_r} G_r(centre, y) dy`, i.e. the expected exit time of `√2 W` from the ball.
pub fn greens_ball_mass(d: usize, r: f64) -> f64 {
    r * r / (2.0 * d as f64)
}

/// Screened ball kernels for `Δu − σ̄u = −f` on the 3D ball of radius `r`,
/// evaluated from the centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenedBall {
    pub radius: f64,
    pub sigma_bar: f64,
}

/// Result of [`screened_kernels_ball_3d`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenedKernels {
    /// Total mass of the screened Poisson kernel over the sphere.
    pub surface_mass: f64,
    /// `∫_{B_r} G^σ̄(centre, y) dy`.
    pub volume_mass: f64,
    /// Sampler for the normalised density `∝ G^σ̄(centre, ·)` in the ball.
    pub sampler: ScreenedBall,
}

pub fn screened_kernels_ball_3d(r: f64, sigma_bar: f64) -> Result<ScreenedKernels> {
    let ball = ScreenedBall::new(r, sigma_bar)?;
    Ok(ScreenedKernels {
        surface_mass: ball.surface_mass(),
        volume_mass: ball.volume_mass(),
        sampler: ball,
    })
}

/// Below this `√σ̄ r`, series expansions replace the closed forms.
const SMALL_X: f64 = 1e-3;
/// Below this `√σ̄ r`, volume radii are drawn by rejection from the harmonic density.
const REJECTION_X: f64 = 0.5;

impl ScreenedBall {
    pub fn new(radius: f64, sigma_bar: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidConfig(format!("ball radius {radius}")));
        }
        if !(sigma_bar >= 0.0 && sigma_bar.is_finite()) {
            return Err(Error::InvalidConfig(format!("sigma_bar {sigma_bar}")));
        }
        Ok(Self { radius, sigma_bar })
    }

    /// Dimensionless screening `√σ̄ r`.
    #[inline]
    pub fn x(&self) -> f64 {
        self.sigma_bar.sqrt() * self.radius
    }

    /// `x / sinh x`: probability of reaching the sphere before a volume event.
    #[inline]
    pub fn surface_mass(&self) -> f64 {
        let x = self.x();
        if x < SMALL_X {
            let x2 = x * x;
            1.0 - x2 / 6.0 + 7.0 * x2 * x2 / 360.0
        } else if x > 20.0 {
            2.0 * x * (-x).exp() / (1.0 - (-2.0 * x).exp())
        } else {
            x / x.sinh()
        }
    }

    /// `∫ G^σ̄ = r² (1 − x/sinh x)/x²`, series for small `x`.
    pub fn volume_mass(&self) -> f64 {
        let x = self.x();
        let r2 = self.radius * self.radius;
        if x < SMALL_X {
            let x2 = x * x;
            r2 * (1.0 / 6.0 - 7.0 * x2 / 360.0 + 31.0 * x2 * x2 / 15120.0)
        } else {
            r2 * (1.0 - self.surface_mass()) / (x * x)
        }
    }

    /// `G^σ̄(centre, y)` with `|y − centre| = rho`.
    pub fn greens(&self, rho: f64) -> Result<f64> {
        if rho <= 0.0 {
            return Err(Error::SingularQuery);
        }
        let k = self.sigma_bar.sqrt();
        if k * self.radius < 1e-8 {
            return Ok(greens_ball_3d(self.radius, rho));
        }
        Ok(sinh_ratio(k * (self.radius - rho), k * self.radius) / (4.0 * PI * rho))
    }

    /// Offset from the centre distributed `∝ G^σ̄(centre, ·)` over the ball.
    pub fn sample_offset<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector<3> {
        let s = self.sample_unit_radius(rng);
        let dir = uniform_direction::<3, R>(rng);
        scale(&dir, s * self.radius)
    }

    /// Radius fraction `s = ρ/r` with density `∝ s sinh(x(1 − s))`.
    pub fn sample_unit_radius<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let x = self.x();
        if x < REJECTION_X {
            // Proposal s(1 − s) (Beta(2, 2)); accept with
            // [sinh(x(1−s))/(x(1−s))] / [sinh x / x] ≤ 1.
            let denom = sinhc(x);
            loop {
                let s = sample_beta22(rng);
                if s < 1e-12 {
                    continue;
                }
                let accept = sinhc(x * (1.0 - s)) / denom;
                if rng.random::<f64>() < accept {
                    return s;
                }
            }
        }
        let u: f64 = rng.random();
        invert_radial_cdf(x, u)
    }
}

/// sinh(a)/sinh(b) for 0 ≤ a ≤ b without overflow.
fn sinh_ratio(a: f64, b: f64) -> f64 {
    if b < 20.0 {
        a.sinh() / b.sinh()
    } else {
        (a - b).exp() * (1.0 - (-2.0 * a).exp()) / (1.0 - (-2.0 * b).exp())
    }
}

/// sinh(x)/x
fn sinhc(x: f64) -> f64 {
    if x < 1e-4 {
        1.0 + x * x / 6.0
    } else {
        x.sinh() / x
    }
}

fn sample_beta22<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Median of three uniforms is Beta(2, 2).
    let (a, b, c): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    a.max(b).min(a.min(b).max(c))
}

/// Normalised CDF of `s sinh(x(1−s))` on [0, 1], scaled by 2e^{−x} for stability:
/// F(s) = [sinh x − sinh(x(1−s)) − s x cosh(x(1−s))] / (sinh x − x).
fn radial_cdf(x: f64, s: f64) -> f64 {
    let e_s = (-x * s).exp();
    let e_2s = (-x * (2.0 - s)).exp();
    let num = (1.0 - (-2.0 * x).exp()) - (e_s - e_2s) - s * x * (e_s + e_2s);
    let den = (1.0 - (-2.0 * x).exp()) - 2.0 * x * (-x).exp();
    num / den
}

fn radial_pdf(x: f64, s: f64) -> f64 {
    // d/ds of the numerator above: s x² (e^{−xs} − e^{−x(2−s)}).
    let num = s * x * x * ((-x * s).exp() - (-x * (2.0 - s)).exp());
    let den = (1.0 - (-2.0 * x).exp()) - 2.0 * x * (-x).exp();
    num / den
}

fn invert_radial_cdf(x: f64, u: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut s = 0.5;
    for _ in 0..100 {
        let f = radial_cdf(x, s) - u;
        if f.abs() < 1e-15 {
            break;
        }
        if f > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let p = radial_pdf(x, s);
        let newton = if p > 0.0 { s - f / p } else { f64::NAN };
        s = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-14 {
            break;
        }
    }
    s.clamp(1e-12, 1.0)
}
