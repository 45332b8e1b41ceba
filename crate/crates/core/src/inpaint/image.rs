//! Grayscale images and PGM (P2/P5) input, P5 output.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Row-major intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Format("image must be non-empty".into()));
        }
        if data.len() != width * height {
            return Err(Error::ShapeMismatch {
                expected: width * height,
                actual: data.len(),
            });
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Format(format!("intensity {v} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let data = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Reads a P2 or P5 PGM. Samples are divided by `maxval`.
    pub fn read_pgm<R: BufRead>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let mut pos = 0;
        let magic = next_token(&bytes, &mut pos)?;
        let binary = match magic.as_str() {
            "P2" => false,
            "P5" => true,
            m => return Err(Error::Format(format!("unsupported PGM magic {m:?}"))),
        };
        let width = parse_header_int(&bytes, &mut pos, "width")?;
        let height = parse_header_int(&bytes, &mut pos, "height")?;
        let maxval = parse_header_int(&bytes, &mut pos, "maxval")?;
        if maxval == 0 || maxval > 65535 {
            return Err(Error::Format(format!("maxval {maxval} out of range")));
        }
        let n = width
            .checked_mul(height)
            .ok_or_else(|| Error::Format("image dimensions overflow".into()))?;
        let scale = maxval as f64;
        let data: Vec<f64> = if binary {
            // Exactly one whitespace byte separates the header from the raster.
            pos += 1;
            let per = if maxval < 256 { 1 } else { 2 };
            let raster = bytes
                .get(pos..pos + n * per)
                .ok_or_else(|| Error::Format("truncated P5 raster".into()))?;
            raster
                .chunks(per)
                .map(|c| {
                    let v = if per == 1 {
                        c[0] as usize
                    } else {
                        (c[0] as usize) << 8 | c[1] as usize
                    };
                    sample(v, maxval, scale)
                })
                .collect::<Result<_>>()?
        } else {
            (0..n)
                .map(|_| {
                    let v = parse_header_int(&bytes, &mut pos, "sample")?;
                    sample(v, maxval, scale)
                })
                .collect::<Result<_>>()?
        };
        Self::new(width, height, data)
    }

    /// Writes a P5 PGM with maxval 255; `comment` lines go into the header.
    pub fn write_pgm<W: Write>(&self, mut w: W, comment: &str) -> Result<()> {
        writeln!(w, "P5")?;
        for line in comment.lines() {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "{} {}\n255", self.width, self.height)?;
        let raster: Vec<u8> = self
            .data
            .iter()
            .map(|v| (v * 255.0).round() as u8)
            .collect();
        w.write_all(&raster)?;
        Ok(())
    }
}

fn sample(v: usize, maxval: usize, scale: f64) -> Result<f64> {
    if v > maxval {
        return Err(Error::Format(format!("sample {v} exceeds maxval {maxval}")));
    }
    Ok(v as f64 / scale)
}

/// Next whitespace-delimited token, skipping `#` comments.
fn next_token(bytes: &[u8], pos: &mut usize) -> Result<String> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Format("unexpected end of PGM data".into()));
    }
    Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

fn parse_header_int(bytes: &[u8], pos: &mut usize, what: &str) -> Result<usize> {
    let tok = next_token(bytes, pos)?;
    tok.parse()
        .map_err(|_| Error::Format(format!("bad PGM {what}: {tok:?}")))
}
