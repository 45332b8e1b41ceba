//! Masked pixel regions as walkable domains.
//!
//! Pixel `(x, y)` is centred at the point `(x, y)`. The domain is the region
//! farther than half a pixel from every known pixel centre; only the ring of
//! known pixels touching the mask can be nearest to a point inside it, so
//! queries search the ring alone.

use rand::RngCore;

use super::GrayImage;
use crate::error::{Error, Result};
use crate::geometry::bvh::Bvh;
use crate::geometry::{BoundaryQuery, Domain};
use crate::vector::{dist2, Aabb, Vector};

#[derive(Debug, Clone)]
pub struct MaskDomain {
    width: usize,
    height: usize,
    masked: Vec<bool>,
    /// Pixel indices of the boundary ring.
    ring: Vec<usize>,
    centers: Vec<Vector<2>>,
    bvh: Bvh<2>,
    bbox: Aabb<2>,
}

impl MaskDomain {
    /// `masked[y * width + x]` marks unknown pixels.
    pub fn new(width: usize, height: usize, masked: Vec<bool>) -> Result<Self> {
        if masked.len() != width * height {
            return Err(Error::ShapeMismatch {
                expected: width * height,
                actual: masked.len(),
            });
        }
        let mut ring = Vec::new();
        let mut bbox = Aabb::empty();
        let mut on_border = None;
        for y in 0..height {
            for x in 0..width {
                let i = y * width + x;
                if masked[i] {
                    if x == 0 || y == 0 || x + 1 == width || y + 1 == height {
                        on_border.get_or_insert((x, y));
                    }
                    bbox.grow(&[x as f64, y as f64]);
                    continue;
                }
                let touches = (-1i64..=1).any(|dy| {
                    (-1i64..=1).any(|dx| {
                        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                        nx >= 0
                            && ny >= 0
                            && (nx as usize) < width
                            && (ny as usize) < height
                            && masked[ny as usize * width + nx as usize]
                    })
                });
                if touches {
                    ring.push(i);
                }
            }
        }
        let has_masked = masked.iter().any(|m| *m);
        if has_masked && ring.is_empty() {
            return Err(Error::IsolatedMask);
        }
        if let Some((x, y)) = on_border {
            return Err(Error::InvalidDomain(format!(
                "masked pixel ({x}, {y}) lies on the image border"
            )));
        }
        let centers: Vec<Vector<2>> = ring
            .iter()
            .map(|&i| [(i % width) as f64, (i / width) as f64])
            .collect();
        let boxes: Vec<Aabb<2>> = centers.iter().map(|c| Aabb { min: *c, max: *c }).collect();
        let bbox = if has_masked { bbox.inflated(1.0) } else { bbox };
        Ok(Self {
            width,
            height,
            masked,
            ring,
            centers,
            bvh: Bvh::build(&boxes),
            bbox,
        })
    }

    /// Pixels with intensity above one half are masked.
    pub fn from_image(mask: &GrayImage) -> Result<Self> {
        let flags = mask.data().iter().map(|v| *v > 0.5).collect();
        Self::new(mask.width(), mask.height(), flags)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_masked(&self, x: usize, y: usize) -> bool {
        self.masked[y * self.width + x]
    }

    pub fn masked_flags(&self) -> &[bool] {
        &self.masked
    }

    /// Row-major indices of masked pixels.
    pub fn masked_pixels(&self) -> Vec<usize> {
        (0..self.masked.len()).filter(|&i| self.masked[i]).collect()
    }

    pub fn ring(&self) -> &[usize] {
        &self.ring
    }

    /// Pixel index of the ring pixel nearest to `p`.
    pub fn nearest_ring_pixel(&self, p: &Vector<2>) -> Option<usize> {
        let c = self
            .bvh
            .closest(p, |i| (self.centers[i], dist2(p, &self.centers[i])))?;
        Some(self.ring[c.primitive])
    }

    pub fn pixel_of(&self, p: &Vector<2>) -> Option<usize> {
        let (x, y) = (p[0].round(), p[1].round());
        if x < 0.0 || y < 0.0 || x as usize >= self.width || y as usize >= self.height {
            return None;
        }
        Some(y as usize * self.width + x as usize)
    }
}

impl Domain<2> for MaskDomain {
    fn query(&self, p: &Vector<2>) -> BoundaryQuery<2> {
        match self
            .bvh
            .closest(p, |i| (self.centers[i], dist2(p, &self.centers[i])))
        {
            Some(c) => {
                let d = c.dist2.sqrt() - 0.5;
                BoundaryQuery {
                    closest: c.point,
                    distance: d.abs(),
                    inside: d > 0.0,
                }
            }
            None => BoundaryQuery {
                closest: *p,
                distance: 0.0,
                inside: false,
            },
        }
    }

    fn bounding_box(&self) -> Aabb<2> {
        self.bbox
    }

    fn contains(&self, p: &Vector<2>) -> bool {
        self.pixel_of(p).is_some_and(|i| self.masked[i]) && self.query(p).inside
    }

    /// Ring pixel centres, cycled.
    fn sample_boundary(&self, n: usize, _rng: &mut dyn RngCore) -> Result<Vec<Vector<2>>> {
        if self.centers.is_empty() {
            return Err(Error::IsolatedMask);
        }
        Ok((0..n)
            .map(|k| self.centers[k % self.centers.len()])
            .collect())
    }
}
