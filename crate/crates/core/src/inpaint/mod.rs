//! Harmonic and biharmonic inpainting of masked grayscale pixels.
//!
//! The biharmonic problem `Δ²u = 0` is split into `Δv = 0` with `v` given by
//! the discrete Laplacian of the image on the boundary ring, followed by
//! `Δu = v` with `u` given by the known intensities.

mod image;
mod mask;

pub use image::GrayImage;
pub use mask::MaskDomain;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{estimate, EstimateKeys, PointEstimate};
use crate::vector::Vector;
use crate::walker::{PoissonProblem, WalkConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InpaintStats {
    pub masked_pixels: usize,
    pub walks_per_pixel: usize,
    pub walks: u64,
    pub truncated_walks: u64,
    pub mean_standard_error: f64,
    pub max_standard_error: f64,
}

#[derive(Debug, Clone)]
pub struct Inpainting {
    pub image: GrayImage,
    /// Per pixel; zero on known pixels.
    pub standard_error: Vec<f64>,
    pub stats: InpaintStats,
}

struct MaskProblem<'a> {
    mask: &'a MaskDomain,
    /// Per-pixel values, read on ring pixels.
    boundary: &'a [f64],
    /// Per-pixel source grid, bilinearly interpolated.
    source: Option<&'a [f64]>,
}

impl MaskProblem<'_> {
    fn bilinear(&self, grid: &[f64], p: &Vector<2>) -> f64 {
        let (w, h) = (self.mask.width(), self.mask.height());
        let x = p[0].clamp(0.0, (w - 1) as f64);
        let y = p[1].clamp(0.0, (h - 1) as f64);
        let (x0, y0) = (
            (x.floor() as usize).min(w - 1),
            (y.floor() as usize).min(h - 1),
        );
        let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let at = |xx: usize, yy: usize| grid[yy * w + xx];
        (1.0 - fy) * ((1.0 - fx) * at(x0, y0) + fx * at(x1, y0))
            + fy * ((1.0 - fx) * at(x0, y1) + fx * at(x1, y1))
    }
}

impl PoissonProblem<2> for MaskProblem<'_> {
    type Domain = MaskDomain;

    fn domain(&self) -> &MaskDomain {
        self.mask
    }

    fn source(&self, x: &Vector<2>) -> f64 {
        self.source.map_or(0.0, |g| self.bilinear(g, x))
    }

    fn boundary(&self, x: &Vector<2>) -> f64 {
        // Walks end at ring pixel centres; fall back to a search otherwise.
        let i = self
            .mask
            .pixel_of(x)
            .filter(|i| !self.mask.masked_flags()[*i])
            .or_else(|| self.mask.nearest_ring_pixel(x))
            .expect("mask has a ring");
        self.boundary[i]
    }

    fn has_source(&self) -> bool {
        self.source.is_some()
    }
}

fn check_shapes(img: &GrayImage, mask: &MaskDomain) -> Result<()> {
    if (img.width(), img.height()) != (mask.width(), mask.height()) {
        return Err(Error::ShapeMismatch {
            expected: mask.width() * mask.height(),
            actual: img.width() * img.height(),
        });
    }
    Ok(())
}

fn solve(
    mask: &MaskDomain,
    pixels: &[usize],
    boundary: &[f64],
    source: Option<&[f64]>,
    cfg: &WalkConfig,
    walks: usize,
    instance: u64,
) -> Result<Vec<PointEstimate>> {
    let w = mask.width();
    let points: Vec<Vector<2>> = pixels
        .iter()
        .map(|&i| [(i % w) as f64, (i / w) as f64])
        .collect();
    let problem = MaskProblem {
        mask,
        boundary,
        source,
    };
    estimate(
        &problem,
        &points,
        walks,
        cfg,
        EstimateKeys::new(instance, 0),
    )
}

fn finish(
    img: &GrayImage,
    pixels: &[usize],
    estimates: &[PointEstimate],
    walks: usize,
    extra_walks: u64,
    clamp: bool,
) -> Result<Inpainting> {
    let mut out = img.clone();
    let mut se = vec![0.0; img.data().len()];
    let mut truncated = 0;
    for (&i, e) in pixels.iter().zip(estimates) {
        let v = e.mean();
        out.data_mut()[i] = if clamp { v.clamp(0.0, 1.0) } else { v };
        se[i] = e.standard_error().unwrap_or(0.0);
        truncated += e.truncated();
    }
    if let Some(v) = out.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Format(format!(
            "inpainted intensity {v} outside [0, 1]"
        )));
    }
    let n = pixels.len().max(1) as f64;
    let stats = InpaintStats {
        masked_pixels: pixels.len(),
        walks_per_pixel: walks,
        walks: (pixels.len() * walks) as u64 + extra_walks,
        truncated_walks: truncated,
        mean_standard_error: pixels.iter().map(|&i| se[i]).sum::<f64>() / n,
        max_standard_error: pixels.iter().map(|&i| se[i]).fold(0.0, f64::max),
    };
    Ok(Inpainting {
        image: out,
        standard_error: se,
        stats,
    })
}

/// Replaces every masked pixel by a walk estimate of the harmonic extension
/// of the ring intensities. Known pixels are copied unchanged.
pub fn inpaint_harmonic(
    img: &GrayImage,
    mask: &MaskDomain,
    cfg: &WalkConfig,
    walks_per_pixel: usize,
) -> Result<Inpainting> {
    check_shapes(img, mask)?;
    let pixels = mask.masked_pixels();
    if pixels.is_empty() {
        return finish(img, &[], &[], walks_per_pixel, 0, false);
    }
    let est = solve(mask, &pixels, img.data(), None, cfg, walks_per_pixel, 0)?;
    // Each walk returns a ring intensity, so means already lie in [0, 1].
    finish(img, &pixels, &est, walks_per_pixel, 0, false)
}

/// Five-point Laplacian of the known image on every ring pixel.
///
/// Along each axis the central difference is used when both neighbours are
/// known, else a one-sided difference `I(p) − 2I(p±e) + I(p±2e)` into the
/// known side.
pub fn ring_laplacian(img: &GrayImage, mask: &MaskDomain) -> Result<Vec<f64>> {
    check_shapes(img, mask)?;
    let (w, h) = (img.width() as i64, img.height() as i64);
    let known = |x: i64, y: i64| {
        x >= 0 && y >= 0 && x < w && y < h && !mask.is_masked(x as usize, y as usize)
    };
    let at = |x: i64, y: i64| img.get(x as usize, y as usize);
    let mut lap = vec![0.0; img.data().len()];
    for &i in mask.ring() {
        let (x, y) = ((i % img.width()) as i64, (i / img.width()) as i64);
        let mut total = 0.0;
        for (ex, ey) in [(1, 0), (0, 1)] {
            total += if known(x - ex, y - ey) && known(x + ex, y + ey) {
                at(x - ex, y - ey) - 2.0 * at(x, y) + at(x + ex, y + ey)
            } else if known(x + ex, y + ey) && known(x + 2 * ex, y + 2 * ey) {
                at(x, y) - 2.0 * at(x + ex, y + ey) + at(x + 2 * ex, y + 2 * ey)
            } else if known(x - ex, y - ey) && known(x - 2 * ex, y - 2 * ey) {
                at(x, y) - 2.0 * at(x - ex, y - ey) + at(x - 2 * ex, y - 2 * ey)
            } else {
                return Err(Error::StencilOutOfBounds {
                    x: x as usize,
                    y: y as usize,
                });
            };
        }
        lap[i] = total;
    }
    Ok(lap)
}

/// Biharmonic inpainting via two coupled walk solves; output clamped to `[0, 1]`.
///
/// `v = Δu` is first solved on the masked pixels from its ring values, then
/// `Δu = v` is solved with `v` bilinearly interpolated from that grid.
pub fn inpaint_biharmonic(
    img: &GrayImage,
    mask: &MaskDomain,
    cfg: &WalkConfig,
    walks_per_pixel: usize,
) -> Result<Inpainting> {
    check_shapes(img, mask)?;
    let pixels = mask.masked_pixels();
    if pixels.is_empty() {
        return finish(img, &[], &[], walks_per_pixel, 0, true);
    }
    let mut v = ring_laplacian(img, mask)?;
    let v_est = solve(mask, &pixels, &v, None, cfg, walks_per_pixel, 1)?;
    for (&i, e) in pixels.iter().zip(&v_est) {
        v[i] = e.mean();
    }
    let est = solve(mask, &pixels, img.data(), Some(&v), cfg, walks_per_pixel, 0)?;
    finish(
        img,
        &pixels,
        &est,
        walks_per_pixel,
        (pixels.len() * walks_per_pixel) as u64,
        true,
    )
}
