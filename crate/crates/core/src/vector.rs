//! Fixed-size vector helpers over `[f64; D]`.

use serde::{Deserialize, Serialize};

pub type Vector<const D: usize> = [f64; D];

#[inline]
pub fn add<const D: usize>(a: &Vector<D>, b: &Vector<D>) -> Vector<D> {
    std::array::from_fn(|i| a[i] + b[i])
}

#[inline]
pub fn sub<const D: usize>(a: &Vector<D>, b: &Vector<D>) -> Vector<D> {
    std::array::from_fn(|i| a[i] - b[i])
}

#[inline]
pub fn scale<const D: usize>(a: &Vector<D>, s: f64) -> Vector<D> {
    std::array::from_fn(|i| a[i] * s)
}

/// `a + s * b`
#[inline]
pub fn axpy<const D: usize>(a: &Vector<D>, s: f64, b: &Vector<D>) -> Vector<D> {
    std::array::from_fn(|i| a[i] + s * b[i])
}

#[inline]
pub fn dot<const D: usize>(a: &Vector<D>, b: &Vector<D>) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2<const D: usize>(a: &Vector<D>) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm<const D: usize>(a: &Vector<D>) -> f64 {
    norm2(a).sqrt()
}

#[inline]
pub fn dist2<const D: usize>(a: &Vector<D>, b: &Vector<D>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist<const D: usize>(a: &Vector<D>, b: &Vector<D>) -> f64 {
    dist2(a, b).sqrt()
}

#[inline]
pub fn cross(a: &Vector<3>, b: &Vector<3>) -> Vector<3> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn normalize<const D: usize>(a: &Vector<D>) -> Vector<D> {
    let n = norm(a);
    if n > 0.0 {
        scale(a, 1.0 / n)
    } else {
        *a
    }
}

pub fn is_finite<const D: usize>(a: &Vector<D>) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb<const D: usize> {
    #[serde(with = "serde_arrays")]
    pub min: Vector<D>,
    #[serde(with = "serde_arrays")]
    pub max: Vector<D>,
}

impl<const D: usize> Aabb<D> {
    pub fn empty() -> Self {
        Self {
            min: [f64::INFINITY; D],
            max: [f64::NEG_INFINITY; D],
        }
    }

    pub fn from_points<'a, I: IntoIterator<Item = &'a Vector<D>>>(points: I) -> Self {
        let mut b = Self::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn grow(&mut self, p: &Vector<D>) {
        for i in 0..D {
            self.min[i] = self.min[i].min(p[i]);
            self.max[i] = self.max[i].max(p[i]);
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        Self {
            min: std::array::from_fn(|i| self.min[i].min(other.min[i])),
            max: std::array::from_fn(|i| self.max[i].max(other.max[i])),
        }
    }

    pub fn center(&self) -> Vector<D> {
        std::array::from_fn(|i| 0.5 * (self.min[i] + self.max[i]))
    }

    pub fn extent(&self) -> Vector<D> {
        std::array::from_fn(|i| self.max[i] - self.min[i])
    }

    /// Inflate every side by `fraction` of the extent along that axis.
    pub fn inflated(&self, fraction: f64) -> Self {
        let e = self.extent();
        Self {
            min: std::array::from_fn(|i| self.min[i] - fraction * e[i]),
            max: std::array::from_fn(|i| self.max[i] + fraction * e[i]),
        }
    }

    pub fn volume(&self) -> f64 {
        self.extent().iter().product()
    }

    pub fn largest_axis(&self) -> usize {
        let e = self.extent();
        (0..D).fold(0, |best, i| if e[i] > e[best] { i } else { best })
    }

    /// Squared distance from `p` to the box (zero inside).
    #[inline]
    pub fn dist2(&self, p: &Vector<D>) -> f64 {
        let mut d = 0.0;
        for i in 0..D {
            let v = if p[i] < self.min[i] {
                self.min[i] - p[i]
            } else if p[i] > self.max[i] {
                p[i] - self.max[i]
            } else {
                0.0
            };
            d += v * v;
        }
        d
    }

    /// Half the diagonal length.
    pub fn half_diagonal(&self) -> f64 {
        0.5 * norm(&self.extent())
    }
}

/// serde support for const-generic arrays (serde only derives up to fixed sizes).
pub(crate) mod serde_arrays {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer, const D: usize>(v: &[f64; D], s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, De: Deserializer<'de>, const D: usize>(
        d: De,
    ) -> Result<[f64; D], De::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        v.try_into()
            .map_err(|v: Vec<f64>| De::Error::invalid_length(v.len(), &"fixed-length array"))
    }
}
