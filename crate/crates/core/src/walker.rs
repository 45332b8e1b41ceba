//! Single-trajectory estimators.
//!
//! Sign conventions: [`walk_poisson`] targets `Δu = f`, `u = g` on the
//! boundary, so the source contribution is subtracted. [`walk_screened_delta`]
//! targets `∇·(α∇u) − σu = −f` and adds its source contribution.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::greens::{ball_volume, greens_ball_2d, greens_ball_3d, ScreenedBall};
use crate::rng::{uniform_direction, uniform_in_ball};
use crate::vector::{add, axpy, norm, Vector};

/// Default ε-shell as a fraction of the domain scale.
pub const DEFAULT_EPS_FRACTION: f64 = 1e-3;
pub const DEFAULT_MAX_STEPS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkConfig {
    /// Absolute boundary capture distance.
    pub eps_shell: f64,
    pub max_steps: usize,
    #[serde(default)]
    pub antithetic: bool,
    /// Screening majorant; required by the delta-tracking walker only.
    #[serde(default)]
    pub sigma_bar: Option<f64>,
    #[serde(default)]
    pub rng_seed: u64,
}

impl WalkConfig {
    pub fn new(eps_shell: f64, max_steps: usize, rng_seed: u64) -> Self {
        Self {
            eps_shell,
            max_steps,
            antithetic: false,
            sigma_bar: None,
            rng_seed,
        }
    }

    /// ε-shell of `1e-3 ×` the domain scale, 1000 steps.
    pub fn for_domain<const D: usize, Dm: Domain<D> + ?Sized>(domain: &Dm, rng_seed: u64) -> Self {
        Self::new(
            DEFAULT_EPS_FRACTION * domain.scale(),
            DEFAULT_MAX_STEPS,
            rng_seed,
        )
    }

    pub fn with_sigma_bar(mut self, sigma_bar: f64) -> Self {
        self.sigma_bar = Some(sigma_bar);
        self
    }

    pub fn with_antithetic(mut self, on: bool) -> Self {
        self.antithetic = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_shell > 0.0 && self.eps_shell.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "eps_shell must be > 0, got {}",
                self.eps_shell
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig("max_steps must be >= 1".into()));
        }
        if let Some(s) = self.sigma_bar {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "sigma_bar must be > 0, got {s}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Boundary,
    MaxSteps,
    /// Delta tracking only: throughput dropped to exactly zero.
    Absorbed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryResult {
    pub value: f64,
    pub steps_taken: usize,
    pub terminated_by: Termination,
}

/// `Δu = f` in the domain, `u = g` on its boundary.
pub trait PoissonProblem<const D: usize>: Sync {
    type Domain: Domain<D>;

    fn domain(&self) -> &Self::Domain;
    fn source(&self, x: &Vector<D>) -> f64;
    fn boundary(&self, x: &Vector<D>) -> f64;

    /// `false` when `f ≡ 0`; the walker then never evaluates the source.
    fn has_source(&self) -> bool {
        true
    }
}

/// Interior data of the screened problem `ΔU − σ'U = −f'` after the
/// `U = √α u` substitution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenedTerms {
    /// σ'(x)
    pub absorption: f64,
    /// f'(x)
    pub source: f64,
}

/// A problem `∇·(α∇u) − σu = −f`, `u = g`, presented in screened form.
pub trait ScreenedProblem: Sync {
    type Domain: Domain<3>;

    fn domain(&self) -> &Self::Domain;
    fn sqrt_diffusion(&self, x: &Vector<3>) -> f64;
    fn interior(&self, x: &Vector<3>) -> ScreenedTerms;
    /// g'(x) = √α(x) g(x)
    fn boundary(&self, x: &Vector<3>) -> f64;
}

/// Closure-backed Poisson problem, mostly for tests and synthetic families.
pub struct FnProblem<Dm, F, G> {
    pub domain: Dm,
    pub source: Option<F>,
    pub boundary: G,
}

impl<Dm, G> FnProblem<Dm, fn(&[f64]) -> f64, G> {
    /// Laplace problem (`f ≡ 0`).
    pub fn laplace(domain: Dm, boundary: G) -> Self {
        Self {
            domain,
            source: None,
            boundary,
        }
    }
}

impl<Dm, F, G> FnProblem<Dm, F, G> {
    pub fn poisson(domain: Dm, source: F, boundary: G) -> Self {
        Self {
            domain,
            source: Some(source),
            boundary,
        }
    }
}

impl<const D: usize, Dm, F, G> PoissonProblem<D> for FnProblem<Dm, F, G>
where
    Dm: Domain<D>,
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> f64 + Sync,
{
    type Domain = Dm;

    fn domain(&self) -> &Dm {
        &self.domain
    }

    fn source(&self, x: &Vector<D>) -> f64 {
        self.source.as_ref().map_or(0.0, |f| f(x))
    }

    fn boundary(&self, x: &Vector<D>) -> f64 {
        (self.boundary)(x)
    }

    fn has_source(&self) -> bool {
        self.source.is_some()
    }
}

#[inline]
fn greens<const D: usize>(r: f64, rho: f64) -> f64 {
    match D {
        2 => greens_ball_2d(r, rho),
        3 => greens_ball_3d(r, rho),
        _ => unreachable!("walkers are instantiated for d = 2, 3 only"),
    }
}

/// One Walk-on-Spheres trajectory for `Δu = f`.
pub fn walk_poisson<const D: usize, P, R>(
    problem: &P,
    xi: &Vector<D>,
    cfg: &WalkConfig,
    rng: &mut R,
) -> Result<TrajectoryResult>
where
    P: PoissonProblem<D> + ?Sized,
    R: Rng + ?Sized,
{
    walk_poisson_mirrored(problem, xi, cfg, rng, 1.0)
}

/// `mirror = -1` reflects every direction draw through the sphere centre.
fn walk_poisson_mirrored<const D: usize, P, R>(
    problem: &P,
    xi: &Vector<D>,
    cfg: &WalkConfig,
    rng: &mut R,
    mirror: f64,
) -> Result<TrajectoryResult>
where
    P: PoissonProblem<D> + ?Sized,
    R: Rng + ?Sized,
{
    if !(D == 2 || D == 3) {
        return Err(Error::UnsupportedDimension(D));
    }
    let domain = problem.domain();
    let mut q = domain.query(xi);
    if !q.inside {
        return Err(Error::ExteriorQuery(xi.to_vec()));
    }
    let with_source = problem.has_source();
    let mut x = *xi;
    let mut source_sum = 0.0;
    let mut steps = 0;
    loop {
        // Outside can only happen within round-off of the boundary.
        debug_assert!(
            q.inside || q.distance < cfg.eps_shell,
            "walk left the domain at {x:?}"
        );
        if !q.inside || q.distance < cfg.eps_shell || steps == cfg.max_steps {
            let terminated_by = if q.inside && q.distance >= cfg.eps_shell {
                Termination::MaxSteps
            } else {
                Termination::Boundary
            };
            return Ok(TrajectoryResult {
                value: problem.boundary(&q.closest) - source_sum,
                steps_taken: steps,
                terminated_by,
            });
        }
        let r = q.distance;
        debug_assert!(r > 0.0);
        if with_source {
            let offset = uniform_in_ball::<D, R>(rng, r);
            let y = axpy(&x, mirror, &offset);
            source_sum += ball_volume(D, r) * problem.source(&y) * greens::<D>(r, norm(&offset));
        }
        let dir = uniform_direction::<D, R>(rng);
        x = axpy(&x, mirror * r, &dir);
        steps += 1;
        q = domain.query(&x);
    }
}

/// An antithetic pair: the second walk uses the same draws with every
/// direction reflected, so both are marginally distributed as [`walk_poisson`].
pub fn walk_poisson_antithetic<const D: usize, P, R>(
    problem: &P,
    xi: &Vector<D>,
    cfg: &WalkConfig,
    rng: &mut R,
) -> Result<(TrajectoryResult, TrajectoryResult)>
where
    P: PoissonProblem<D> + ?Sized,
    R: Rng + Clone,
{
    let mut twin = rng.clone();
    let a = walk_poisson_mirrored(problem, xi, cfg, rng, 1.0)?;
    let b = walk_poisson_mirrored(problem, xi, cfg, &mut twin, -1.0)?;
    Ok((a, b))
}

/// One delta-tracking trajectory for the screened problem; returns a sample of
/// `U(ξ)/√α(ξ) = u(ξ)`.
///
/// Per step, with probability `P = x/sinh x` the walk jumps to the sphere.
/// Otherwise a volume point `y ∝ G^σ̄` is drawn, `T·f'(y)/σ̄` is collected and
/// the walk restarts from `y` with throughput `T ← T(1 − σ'(y)/σ̄)`.
pub fn walk_screened_delta<P, R>(
    problem: &P,
    xi: &Vector<3>,
    cfg: &WalkConfig,
    rng: &mut R,
) -> Result<TrajectoryResult>
where
    P: ScreenedProblem + ?Sized,
    R: Rng + ?Sized,
{
    let sigma_bar = cfg
        .sigma_bar
        .filter(|s| *s > 0.0)
        .ok_or_else(|| Error::InvalidConfig("delta tracking needs sigma_bar > 0".into()))?;
    let domain = problem.domain();
    let mut q = domain.query(xi);
    if !q.inside {
        return Err(Error::ExteriorQuery(xi.to_vec()));
    }
    let mut x = *xi;
    let mut throughput = 1.0;
    let mut acc = 0.0;
    let mut steps = 0;
    let terminated_by = loop {
        debug_assert!(
            q.inside || q.distance < cfg.eps_shell,
            "walk left the domain at {x:?}"
        );
        if !q.inside || q.distance < cfg.eps_shell || steps == cfg.max_steps {
            acc += throughput * problem.boundary(&q.closest);
            break if q.inside && q.distance >= cfg.eps_shell {
                Termination::MaxSteps
            } else {
                Termination::Boundary
            };
        }
        let r = q.distance;
        let ball = ScreenedBall {
            radius: r,
            sigma_bar,
        };
        if rng.random::<f64>() < ball.surface_mass() {
            let dir = uniform_direction::<3, R>(rng);
            x = axpy(&x, r, &dir);
        } else {
            let y = add(&x, &ball.sample_offset(rng));
            let terms = problem.interior(&y);
            if terms.absorption > sigma_bar {
                return Err(Error::MajorantViolated {
                    point: y.to_vec(),
                    absorption: terms.absorption,
                    sigma_bar,
                });
            }
            acc += throughput * terms.source / sigma_bar;
            throughput *= 1.0 - terms.absorption / sigma_bar;
            x = y;
            if throughput == 0.0 {
                steps += 1;
                break Termination::Absorbed;
            }
        }
        steps += 1;
        q = domain.query(&x);
    };
    Ok(TrajectoryResult {
        value: acc / problem.sqrt_diffusion(xi),
        steps_taken: steps,
        terminated_by,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Ball, PolarDomain};
    use crate::rng::substream;
    use crate::vector::{dist, sub};

    fn disk_cfg() -> WalkConfig {
        WalkConfig::new(1e-4, 1000, 0)
    }

    #[test]
    fn constant_boundary_is_exact_without_source() {
        let p = FnProblem::laplace(PolarDomain::new(1.0, 0.15, -0.1).unwrap(), |_: &[f64]| 0.7);
        for t in 0..200 {
            let mut rng = substream(1, 0, 0, t);
            let r = walk_poisson(&p, &[0.1, -0.2], &disk_cfg(), &mut rng).unwrap();
            assert_eq!(r.value, 0.7);
            assert!(r.steps_taken <= 1000);
        }
    }

    #[test]
    fn zero_source_never_evaluates_f() {
        struct Guarded(Ball<2>);
        impl PoissonProblem<2> for Guarded {
            type Domain = Ball<2>;
            fn domain(&self) -> &Ball<2> {
                &self.0
            }
            fn source(&self, _: &Vector<2>) -> f64 {
                panic!("source evaluated")
            }
            fn boundary(&self, x: &Vector<2>) -> f64 {
                x[0]
            }
            fn has_source(&self) -> bool {
                false
            }
        }
        let p = Guarded(Ball::unit());
        let mut rng = substream(2, 0, 0, 0);
        let r = walk_poisson(&p, &[0.3, 0.0], &disk_cfg(), &mut rng).unwrap();
        assert!(r.value.abs() <= 1.0);
    }

    #[test]
    fn exterior_start_is_rejected() {
        let p = FnProblem::laplace(Ball::<2>::unit(), |_: &[f64]| 0.0);
        let mut rng = substream(0, 0, 0, 0);
        assert!(matches!(
            walk_poisson(&p, &[1.5, 0.0], &disk_cfg(), &mut rng),
            Err(Error::ExteriorQuery(_))
        ));
    }

    #[test]
    fn first_sphere_from_origin_has_unit_radius() {
        let p = FnProblem::laplace(Ball::<2>::unit(), |x: &[f64]| x[0].atan2(x[1]));
        let cfg = WalkConfig::new(1e-4, 1, 0);
        let mut rng = substream(3, 0, 0, 0);
        let r = walk_poisson(&p, &[0.0, 0.0], &cfg, &mut rng).unwrap();
        assert_eq!(r.steps_taken, 1);
        assert_eq!(r.terminated_by, Termination::Boundary);
    }

    #[test]
    fn max_steps_truncation_is_flagged() {
        let p = FnProblem::laplace(Ball::<3>::unit(), |_: &[f64]| 1.0);
        let cfg = WalkConfig::new(1e-12, 2, 0);
        let mut rng = substream(4, 0, 0, 0);
        let r = walk_poisson(&p, &[0.1, 0.0, 0.0], &cfg, &mut rng).unwrap();
        assert_eq!(r.steps_taken, 2);
        assert_eq!(r.terminated_by, Termination::MaxSteps);
        assert_eq!(r.value, 1.0);
    }

    #[test]
    fn antithetic_first_steps_are_antipodal() {
        let p = FnProblem::laplace(Ball::<2>::unit(), |x: &[f64]| x[0] + 10.0 * x[1]);
        let cfg = WalkConfig::new(1e-4, 1, 0);
        let xi = [0.2, 0.1];
        let mut rng = substream(5, 0, 0, 0);
        let (a, b) = walk_poisson_antithetic(&p, &xi, &cfg, &mut rng).unwrap();
        // With one step, g is read at the projection of the first jump; for a
        // ball centred at ξ of radius 1 − |ξ| the landing points are ξ ± r·ω.
        assert_eq!(a.steps_taken, 1);
        assert_eq!(b.steps_taken, 1);
        let mut rng = substream(5, 0, 0, 0);
        let r = 1.0 - crate::vector::norm(&xi);
        let w: Vector<2> = uniform_direction(&mut rng);
        let pa = axpy(&xi, r, &w);
        let pb = axpy(&xi, -r, &w);
        let mid = [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0];
        assert!(dist(&mid, &xi) < 1e-15);
        let proj = |p: Vector<2>| {
            let n = crate::vector::norm(&p);
            [p[0] / n, p[1] / n]
        };
        assert!((a.value - (proj(pa)[0] + 10.0 * proj(pa)[1])).abs() < 1e-12);
        assert!((b.value - (proj(pb)[0] + 10.0 * proj(pb)[1])).abs() < 1e-12);
        let _ = sub(&pa, &pb);
    }

    struct Uniform {
        ball: Ball<3>,
        sigma: f64,
        source: f64,
        boundary: f64,
    }

    impl ScreenedProblem for Uniform {
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

    #[test]
    fn delta_walker_requires_majorant() {
        let p = Uniform {
            ball: Ball::unit(),
            sigma: 2.0,
            source: 0.0,
            boundary: 1.0,
        };
        let mut rng = substream(6, 0, 0, 0);
        let cfg = WalkConfig::new(1e-4, 1000, 0);
        assert!(matches!(
            walk_screened_delta(&p, &[0.0; 3], &cfg, &mut rng),
            Err(Error::InvalidConfig(_))
        ));
        // σ' = 2 > σ̄ = 1: the first volume event aborts the walk.
        let cfg = cfg.with_sigma_bar(1.0);
        let err = (0..100)
            .map(|t| walk_screened_delta(&p, &[0.0; 3], &cfg, &mut substream(6, 0, 0, t)))
            .find_map(|r| r.err())
            .expect("some walk has a volume event");
        assert!(matches!(err, Error::MajorantViolated { .. }));
    }

    #[test]
    fn full_absorption_keeps_only_collected_source() {
        let p = Uniform {
            ball: Ball::unit(),
            sigma: 1.0,
            source: 0.5,
            boundary: 100.0,
        };
        let cfg = WalkConfig::new(1e-4, 1000, 0).with_sigma_bar(1.0);
        let mut absorbed = 0;
        for t in 0..500 {
            let r = walk_screened_delta(&p, &[0.0; 3], &cfg, &mut substream(7, 0, 0, t)).unwrap();
            if r.terminated_by == Termination::Absorbed {
                absorbed += 1;
                // One volume event: source/σ̄ collected, throughput → 0.
                assert_eq!(r.value, 0.5);
            } else {
                assert_eq!(r.value, 100.0);
            }
        }
        assert!(absorbed > 0);
    }
}
