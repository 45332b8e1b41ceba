//! Batch front end for the `wosno` solvers: JSON configs, artifact writing
//! and exit-status mapping for the `wosno` binary.

pub mod bench;
pub mod config;
pub mod error;
pub mod greens_check;
pub mod inpaint;
pub mod problem;
pub mod solve;
pub mod train;

use std::io::Write;
use std::path::Path;

use serde::Serialize;

pub use error::{CliError, Result, EXIT_NUMERICAL, EXIT_USAGE};

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let io = |e| CliError::io(path, e);
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::io(path, e.into()))?;
    writeln!(w).map_err(io)?;
    w.flush().map_err(io)
}
