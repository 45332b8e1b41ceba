//! `wosno inpaint`: harmonic or biharmonic fill of masked pixels.

use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use wosno::inpaint::{inpaint_biharmonic, inpaint_harmonic, GrayImage, InpaintStats, MaskDomain};
use wosno::walker::{WalkConfig, DEFAULT_EPS_FRACTION, DEFAULT_MAX_STEPS};
use wosno::Domain;

use crate::config::{HasRun, Provenance, RunSettings};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Harmonic,
    #[default]
    Biharmonic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InpaintConfig {
    #[serde(default)]
    pub run: RunSettings,
    pub image: PathBuf,
    /// PGM where bright pixels (above one half) are unknown.
    pub mask: PathBuf,
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_walks")]
    pub walks_per_pixel: usize,
    /// Absolute ε-shell in pixels; defaults to `1e-3 ×` the mask scale.
    #[serde(default)]
    pub eps_shell: Option<f64>,
    #[serde(default)]
    pub max_steps: Option<usize>,
    /// Ground truth; adds error metrics to the summary.
    #[serde(default)]
    pub reference: Option<PathBuf>,
    #[serde(default = "default_output")]
    pub output: String,
    #[serde(default = "default_summary")]
    pub summary: String,
}

fn default_walks() -> usize {
    256
}

fn default_output() -> String {
    "inpainted.pgm".into()
}

fn default_summary() -> String {
    "inpaint_summary.json".into()
}

impl HasRun for InpaintConfig {
    fn run(&self) -> &RunSettings {
        &self.run
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceError {
    /// Over masked pixels only.
    pub mse: f64,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InpaintSummary {
    pub header: String,
    pub method: Method,
    pub width: usize,
    pub height: usize,
    pub stats: InpaintStats,
    pub seconds: f64,
    pub reference: Option<ReferenceError>,
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    GrayImage::read_pgm(BufReader::new(file)).map_err(|e| match e {
        wosno::Error::Io(io) => CliError::io(path, io),
        other => CliError::Config(format!("{}: {other}", path.display())),
    })
}

fn reference_error(
    out: &GrayImage,
    truth: &GrayImage,
    mask: &MaskDomain,
) -> Result<ReferenceError> {
    if (truth.width(), truth.height()) != (out.width(), out.height()) {
        return Err(CliError::Config(
            "reference image size differs from the input".into(),
        ));
    }
    let pixels = mask.masked_pixels();
    let errs: Vec<f64> = pixels
        .iter()
        .map(|&i| out.data()[i] - truth.data()[i])
        .collect();
    let n = errs.len().max(1) as f64;
    Ok(ReferenceError {
        mse: errs.iter().map(|e| e * e).sum::<f64>() / n,
        max_abs_error: errs.iter().fold(0.0, |m, e| m.max(e.abs())),
    })
}

/// Fills the mask; call inside the worker pool.
pub fn inpaint(cfg: &InpaintConfig, header: String) -> Result<(GrayImage, InpaintSummary)> {
    if cfg.walks_per_pixel == 0 {
        return Err(CliError::Config("walks_per_pixel must be >= 1".into()));
    }
    let img = read_pgm(&cfg.image)?;
    let mask = MaskDomain::from_image(&read_pgm(&cfg.mask)?)?;
    let walk = WalkConfig::new(
        cfg.eps_shell.unwrap_or(DEFAULT_EPS_FRACTION * mask.scale()),
        cfg.max_steps.unwrap_or(DEFAULT_MAX_STEPS),
        cfg.run.seed,
    );
    let start = Instant::now();
    let out = match cfg.method {
        Method::Harmonic => inpaint_harmonic(&img, &mask, &walk, cfg.walks_per_pixel)?,
        Method::Biharmonic => inpaint_biharmonic(&img, &mask, &walk, cfg.walks_per_pixel)?,
    };
    let seconds = start.elapsed().as_secs_f64();
    let reference = match &cfg.reference {
        Some(p) => Some(reference_error(&out.image, &read_pgm(p)?, &mask)?),
        None => None,
    };
    let summary = InpaintSummary {
        header,
        method: cfg.method,
        width: img.width(),
        height: img.height(),
        stats: out.stats,
        seconds,
        reference,
    };
    Ok((out.image, summary))
}

/// Writes the filled image (provenance as its comment line) and the summary.
pub fn cmd_inpaint(cfg: &InpaintConfig, workers: usize) -> Result<(PathBuf, InpaintSummary)> {
    let prov = Provenance::new(cfg, workers);
    let (image, summary) = wosno::estimator::with_workers(workers, || inpaint(cfg, prov.text()))??;
    let path = cfg.run.output_path(&cfg.output)?;
    let io = |e| CliError::io(&path, e);
    let mut w = BufWriter::new(std::fs::File::create(&path).map_err(io)?);
    image.write_pgm(&mut w, &prov.text())?;
    w.flush().map_err(io)?;
    crate::write_json(&cfg.run.output_path(&cfg.summary)?, &summary)?;
    Ok((path, summary))
}
