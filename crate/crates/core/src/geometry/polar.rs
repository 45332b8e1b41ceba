//! Star-shaped 2D domains with boundary radius `r0 * (1 + c1 cos 4θ + c2 cos 8θ)`.

use std::f64::consts::TAU;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::bvh::Bvh;
use super::{BoundaryQuery, Domain};
use crate::error::{Error, Result};
use crate::vector::{dist2, sub, Aabb, Vector};

/// Angular samples used for the chord polyline behind the distance query.
pub const DEFAULT_ANGULAR_SAMPLES: usize = 4096;

const INV_PHI: f64 = 0.618_033_988_749_894_9;
const GOLDEN_TOL: f64 = 1e-9;

/// Shape parameters only; see [`PolarDomain`] for the query structure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarShape {
    pub r0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl PolarShape {
    #[inline]
    pub fn radius_at(&self, theta: f64) -> f64 {
        let c4 = (4.0 * theta).cos();
        // cos 8θ = 2 cos² 4θ − 1
        self.r0 * (1.0 + self.c1 * c4 + self.c2 * (2.0 * c4 * c4 - 1.0))
    }

    #[inline]
    pub fn point_at(&self, theta: f64) -> Vector<2> {
        let r = self.radius_at(theta);
        let (s, c) = theta.sin_cos();
        [r * c, r * s]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r0 > 0.0 && self.r0.is_finite()) {
            return Err(Error::InvalidDomain(format!(
                "r0 must be positive, got {}",
                self.r0
            )));
        }
        if !(self.c1.abs() + self.c2.abs() < 1.0) {
            return Err(Error::InvalidDomain(format!(
                "|c1| + |c2| must be < 1, got {} + {}",
                self.c1.abs(),
                self.c2.abs()
            )));
        }
        Ok(())
    }
}

/// Boundary radius at angle `theta`.
pub fn polar_radius(theta: f64, dom: &PolarDomain) -> f64 {
    dom.shape.radius_at(theta)
}

#[derive(Debug, Clone)]
pub struct PolarDomain {
    shape: PolarShape,
    thetas: Vec<f64>,
    samples: Vec<Vector<2>>,
    bvh: Bvh<2>,
    bbox: Aabb<2>,
}

impl PolarDomain {
    pub fn new(r0: f64, c1: f64, c2: f64) -> Result<Self> {
        Self::with_samples(PolarShape { r0, c1, c2 }, DEFAULT_ANGULAR_SAMPLES)
    }

    pub fn unit_disk() -> Self {
        Self::new(1.0, 0.0, 0.0).expect("unit disk is valid")
    }

    pub fn with_samples(shape: PolarShape, n: usize) -> Result<Self> {
        shape.validate()?;
        if n < 16 {
            return Err(Error::InvalidDomain(format!(
                "need at least 16 angular samples, got {n}"
            )));
        }
        let thetas: Vec<f64> = (0..n).map(|i| TAU * i as f64 / n as f64).collect();
        let samples: Vec<Vector<2>> = thetas.iter().map(|&t| shape.point_at(t)).collect();
        let boxes: Vec<Aabb<2>> = (0..n)
            .map(|i| Aabb::from_points([&samples[i], &samples[(i + 1) % n]]))
            .collect();
        let bvh = Bvh::build(&boxes);
        let bbox = Aabb::from_points(&samples).inflated(0.01);
        Ok(Self {
            shape,
            thetas,
            samples,
            bvh,
            bbox,
        })
    }

    pub fn shape(&self) -> &PolarShape {
        &self.shape
    }

    pub fn r0(&self) -> f64 {
        self.shape.r0
    }

    pub fn c1(&self) -> f64 {
        self.shape.c1
    }

    pub fn c2(&self) -> f64 {
        self.shape.c2
    }

    /// Closest point on the true curve, refined from the nearest chord.
    fn closest_on_curve(&self, p: &Vector<2>) -> (Vector<2>, f64) {
        let n = self.samples.len();
        let hit = self
            .bvh
            .closest(p, |i| {
                closest_on_segment(p, &self.samples[i], &self.samples[(i + 1) % n])
            })
            .expect("polar boundary is non-empty");
        let i = hit.primitive;
        let step = TAU / n as f64;
        let t0 = self.thetas[i];
        // Bracket one chord on either side of the nearest one.
        let (mut a, mut b) = (t0 - step, t0 + 2.0 * step);
        let f = |t: f64| dist2(p, &self.shape.point_at(t));
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let (mut fc, mut fd) = (f(c), f(d));
        while b - a > GOLDEN_TOL {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = f(d);
            }
        }
        let t = 0.5 * (a + b);
        let q = self.shape.point_at(t);
        let d2 = dist2(p, &q);
        // Chord endpoints lie on the curve too; keep whichever is best.
        [(q, d2), (self.samples[i], dist2(p, &self.samples[i])), {
            let s = self.samples[(i + 1) % n];
            (s, dist2(p, &s))
        }]
        .into_iter()
        .fold((q, f64::INFINITY), |best, cand| {
            if cand.1 < best.1 {
                cand
            } else {
                best
            }
        })
    }
}

fn closest_on_segment(p: &Vector<2>, a: &Vector<2>, b: &Vector<2>) -> (Vector<2>, f64) {
    let ab = sub(b, a);
    let ap = sub(p, a);
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
    (q, dist2(p, &q))
}

impl Domain<2> for PolarDomain {
    fn query(&self, p: &Vector<2>) -> BoundaryQuery<2> {
        let inside = self.contains(p);
        let (closest, d2) = self.closest_on_curve(p);
        BoundaryQuery {
            closest,
            distance: d2.sqrt(),
            inside,
        }
    }

    #[inline]
    fn contains(&self, p: &Vector<2>) -> bool {
        let r = p[0].hypot(p[1]);
        let theta = p[1].atan2(p[0]);
        r < self.shape.radius_at(theta)
    }

    fn bounding_box(&self) -> Aabb<2> {
        self.bbox
    }

    /// Points at uniformly spaced angles `2πi/n`.
    fn sample_boundary(&self, n: usize, _rng: &mut dyn RngCore) -> Result<Vec<Vector<2>>> {
        Ok((0..n)
            .map(|i| self.shape.point_at(TAU * i as f64 / n as f64))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use crate::vector::{dist, norm};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    #[test]
    fn radius_examples() {
        let disk = PolarDomain::unit_disk();
        for t in [0.0, 0.3, 2.0, -1.0] {
            assert_eq!(polar_radius(t, &disk), 1.0);
        }
        let d = PolarDomain::new(1.0, 0.2, 0.0).unwrap();
        assert!((polar_radius(0.0, &d) - 1.2).abs() < 1e-15);
        assert!((polar_radius(FRAC_PI_4, &d) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn rejects_invalid_shapes() {
        assert!(PolarDomain::new(0.0, 0.0, 0.0).is_err());
        assert!(PolarDomain::new(1.0, 0.6, -0.4).is_err());
        assert!(PolarDomain::new(1.0, 0.5, 0.49).is_ok());
    }

    #[test]
    fn unit_disk_queries() {
        let d = PolarDomain::unit_disk();
        assert!(d.contains(&[0.0, 0.0]));
        assert!(!d.contains(&[2.0, 0.0]));
        assert!((d.distance_to_boundary(&[0.0, 0.0]).unwrap() - 1.0).abs() < 1e-9);
        assert!((d.distance_to_boundary(&[0.5, 0.0]).unwrap() - 0.5).abs() < 1e-9);
        assert!(matches!(
            d.distance_to_boundary(&[2.0, 0.0]),
            Err(Error::ExteriorQuery(_))
        ));
    }

    #[test]
    fn distance_at_origin_is_min_radius() {
        for (c1, c2) in [(0.2, 0.0), (0.2, -0.2), (-0.15, 0.1), (0.05, 0.19)] {
            let d = PolarDomain::new(1.0, c1, c2).unwrap();
            let min_r = (0..200_000)
                .map(|i| polar_radius(TAU * i as f64 / 200_000.0, &d))
                .fold(f64::INFINITY, f64::min);
            let got = d.distance_to_boundary(&[0.0, 0.0]).unwrap();
            assert!(
                (got - min_r).abs() <= 1e-6 * min_r,
                "{c1} {c2}: {got} vs {min_r}"
            );
        }
    }

    #[test]
    fn distance_matches_dense_curve_search() {
        let d = PolarDomain::new(1.0, 0.18, -0.12).unwrap();
        let mut rng = substream(5, 0, 0, 0);
        let pts = d.sample_interior(200, &mut rng).unwrap();
        let dense: Vec<Vector<2>> = (0..400_000)
            .map(|i| d.shape().point_at(TAU * i as f64 / 400_000.0))
            .collect();
        for p in pts {
            let got = d.distance_to_boundary(&p).unwrap();
            let brute = dense
                .iter()
                .map(|q| dist(&p, q))
                .fold(f64::INFINITY, f64::min);
            // `got` is a true curve distance, so it can only undercut a dense search.
            assert!(got <= brute + 1e-12);
            assert!(brute - got <= 1e-6, "{p:?}: {got} vs {brute}");
        }
    }

    #[test]
    fn boundary_samples_are_evenly_spaced() {
        let d = PolarDomain::unit_disk();
        let mut rng = substream(0, 0, 0, 0);
        let pts = d.sample_boundary(4, &mut rng).unwrap();
        let expect = [0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2];
        for (p, t) in pts.iter().zip(expect) {
            assert!((norm(p) - 1.0).abs() < 1e-15);
            assert!(dist(p, &[t.cos(), t.sin()]) < 1e-15);
        }
        let d = PolarDomain::new(1.0, 0.2, 0.0).unwrap();
        let pts = d.sample_boundary(8, &mut rng).unwrap();
        assert!(dist(&pts[0], &[1.2, 0.0]) < 1e-15);
    }

    #[test]
    fn interior_samples_are_inside_with_area_ratio_acceptance() {
        let d = PolarDomain::unit_disk();
        let mut rng = substream(11, 0, 0, 0);
        assert!(d.sample_interior(0, &mut rng).unwrap().is_empty());
        let (pts, stats) = crate::geometry::rejection_sample(&d, 100_000, &mut rng).unwrap();
        assert!(pts.iter().all(|p| d.contains(p)));
        // Bounding box is inflated by 1% per side, so the ratio is π / (4·1.02²).
        let expected = PI / (4.0 * 1.02 * 1.02);
        assert!((stats.acceptance() - expected).abs() < 0.01);
    }

    #[test]
    fn acceptance_from_tight_square_is_quarter_pi() {
        use rand::Rng;
        let d = PolarDomain::unit_disk();
        let mut rng = substream(12, 0, 0, 0);
        let n = 1_000_000;
        let hits = (0..n)
            .filter(|_| {
                let p = [
                    2.0 * rng.random::<f64>() - 1.0,
                    2.0 * rng.random::<f64>() - 1.0,
                ];
                d.contains(&p)
            })
            .count();
        assert!((hits as f64 / n as f64 - PI / 4.0).abs() < 0.01);
    }

    #[test]
    fn empty_ball_around_interior_points() {
        let d = PolarDomain::new(1.0, -0.2, 0.15).unwrap();
        let mut rng = substream(9, 0, 0, 0);
        for p in d.sample_interior(100, &mut rng).unwrap() {
            let r = d.distance_to_boundary(&p).unwrap();
            assert!(r > 0.0);
            for _ in 0..100 {
                let off = crate::rng::uniform_in_ball::<2, _>(&mut rng, r * (1.0 - 1e-9));
                assert!(d.contains(&[p[0] + off[0], p[1] + off[1]]));
            }
        }
    }
}
