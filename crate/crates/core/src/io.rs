//! CSV and JSON writers for spectra, fit overlays and reports.
//!
//! Floats are written in Rust's shortest round-trip form, so re-reading a
//! file reproduces the arrays bit for bit.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fitting::ExperimentalTrace;
use crate::model::{Configuration, Units};
use crate::spectroscopy::SpectrumTrace;

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_rows<W: Write>(out: W, header: &[&str], columns: &[&[f64]]) -> Result<()> {
    let n = columns.first().map_or(0, |c| c.len());
    if columns.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidInput("columns differ in length".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for i in 0..n {
        w.write_record(columns.iter().map(|c| c[i].to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Arbitrary equal-length columns under `header`.
pub fn save_rows(path: impl AsRef<Path>, header: &[&str], columns: &[&[f64]]) -> Result<()> {
    write_rows(create(path.as_ref())?, header, columns)
}

/// `delta_p,absorption,dispersion` with detunings expressed in `units`.
pub fn write_spectrum<W: Write>(out: W, trace: &SpectrumTrace, cfg: &Configuration, units: Units) -> Result<()> {
    let grid: Vec<f64> = trace.grid.iter().map(|&x| cfg.to_units(x, units)).collect();
    write_rows(
        out,
        &["delta_p", "absorption", "dispersion"],
        &[&grid, &trace.absorption, &trace.dispersion],
    )
}

pub fn save_spectrum(path: impl AsRef<Path>, trace: &SpectrumTrace, cfg: &Configuration, units: Units) -> Result<()> {
    write_spectrum(create(path.as_ref())?, trace, cfg, units)
}

/// Trace in the format read by [`crate::fitting::parse_trace`].
pub fn write_trace<W: Write>(mut out: W, trace: &ExperimentalTrace) -> Result<()> {
    writeln!(out, "# kind: {}", trace.kind)?;
    write_rows(out, &["delta_p_mhz", "signal"], &[&trace.grid, &trace.signal])
}

pub fn save_trace(path: impl AsRef<Path>, trace: &ExperimentalTrace) -> Result<()> {
    write_trace(create(path.as_ref())?, trace)
}

/// `delta_p_mhz,data,model` for plotting a fit against its data.
pub fn save_overlay(path: impl AsRef<Path>, grid_mhz: &[f64], data: &[f64], model: &[f64]) -> Result<()> {
    write_rows(create(path.as_ref())?, &["delta_p_mhz", "data", "model"], &[grid_mhz, data, model])
}

/// Pretty-printed JSON with a trailing newline.
pub fn save_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut out = create(path.as_ref())?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}
