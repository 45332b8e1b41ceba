use rand::RngCore;

use super::{BoundaryQuery, Domain};
use crate::error::{Error, Result};
use crate::rng::uniform_direction;
use crate::vector::{axpy, dist, sub, Aabb, Vector};

/// Open ball; the analytic reference domain for the unit disk/ball problems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ball<const D: usize> {
    pub center: Vector<D>,
    pub radius: f64,
}

impl<const D: usize> Ball<D> {
    pub fn new(center: Vector<D>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidDomain(format!("ball radius {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn unit() -> Self {
        Self {
            center: [0.0; D],
            radius: 1.0,
        }
    }
}

impl<const D: usize> Domain<D> for Ball<D> {
    fn query(&self, p: &Vector<D>) -> BoundaryQuery<D> {
        let r = dist(p, &self.center);
        let closest = if r > 0.0 {
            axpy(&self.center, self.radius / r, &sub(p, &self.center))
        } else {
            let mut e = self.center;
            e[0] += self.radius;
            e
        };
        BoundaryQuery {
            closest,
            distance: (self.radius - r).abs(),
            inside: r < self.radius,
        }
    }

    fn bounding_box(&self) -> Aabb<D> {
        Aabb {
            min: self.center.map(|c| c - self.radius),
            max: self.center.map(|c| c + self.radius),
        }
    }

    fn sample_boundary(&self, n: usize, rng: &mut dyn RngCore) -> Result<Vec<Vector<D>>> {
        Ok((0..n)
            .map(|_| axpy(&self.center, self.radius, &uniform_direction::<D, _>(rng)))
            .collect())
    }
}
