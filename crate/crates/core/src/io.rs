//! File formats: interferogram CSV with a JSON sidecar (schema 1),
//! reconstruction reports and density/JSI dumps.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ScanAxis, ScanConfig};
use crate::freq_engine::{Engine, Interferogram, ScanMetadata};
use crate::numeric::UniformGrid;
use crate::spectral_model::SpectralDensity;
use crate::spectroscopy::{EnvelopePair, JsiGrid, SignalIdlerJsi};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("Io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("ParseError: {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("SchemaMismatch: {path}: {message}")]
    Schema { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, message: impl ToString) -> IoError {
    IoError::Parse {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

/// JSON sidecar describing an interferogram CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub schema: u32,
    /// File name of the CSV next to the sidecar.
    pub data_file: String,
    pub engine: Engine,
    pub scan_axis: ScanAxis,
    pub fixed_delay: Option<f64>,
    pub delays: UniformGrid,
    pub delays_2: Option<UniformGrid>,
    pub points: usize,
    pub metadata: ScanMetadata,
    /// Fully resolved configuration that produced the data.
    #[serde(default)]
    pub config: Option<ScanConfig>,
    /// Free-form run information (timestamps, versions). Not part of the data.
    #[serde(default)]
    pub run: Option<serde_json::Value>,
}

/// Paths written for one interferogram.
#[derive(Debug, Clone, PartialEq)]
pub struct WrittenFiles {
    pub csv: PathBuf,
    pub sidecar: PathBuf,
}

/// CSV body `tau1,tau2,rate` with shortest round-trip float formatting.
pub fn interferogram_csv(ig: &Interferogram) -> String {
    let mut out = String::from("tau1,tau2,rate\n");
    for (p, r) in ig.pairs().iter().zip(&ig.rates) {
        out.push_str(&format!("{},{},{}\n", p.tau1, p.tau2, r));
    }
    out
}

pub fn write_interferogram(
    dir: &Path,
    stem: &str,
    ig: &Interferogram,
    config: Option<&ScanConfig>,
    run: Option<serde_json::Value>,
) -> Result<WrittenFiles, IoError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let csv = dir.join(format!("{stem}.csv"));
    let sidecar_path = dir.join(format!("{stem}.json"));
    fs::write(&csv, interferogram_csv(ig)).map_err(io_err(&csv))?;
    let sidecar = Sidecar {
        schema: SCHEMA_VERSION,
        data_file: format!("{stem}.csv"),
        engine: ig.engine,
        scan_axis: ig.scan_axis,
        fixed_delay: ig.fixed_delay,
        delays: ig.delays,
        delays_2: ig.delays_2,
        points: ig.rates.len(),
        metadata: ig.metadata,
        config: config.cloned(),
        run,
    };
    write_json(&sidecar_path, &sidecar)?;
    Ok(WrittenFiles { csv, sidecar: sidecar_path })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(|e| parse_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// Reads an interferogram from its sidecar or from the CSV next to one.
pub fn read_interferogram(path: &Path) -> Result<Interferogram, IoError> {
    let sidecar_path = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => path.to_path_buf(),
        Some("csv") => path.with_extension("json"),
        _ => {
            return Err(IoError::Schema {
                path: path.to_path_buf(),
                message: "expected a .json sidecar or a .csv data file".into(),
            })
        }
    };
    let text = fs::read_to_string(&sidecar_path).map_err(io_err(&sidecar_path))?;
    let sidecar: Sidecar = serde_json::from_str(&text).map_err(|e| parse_err(&sidecar_path, e))?;
    if sidecar.schema != SCHEMA_VERSION {
        return Err(IoError::Schema {
            path: sidecar_path,
            message: format!("schema {} is not {SCHEMA_VERSION}", sidecar.schema),
        });
    }
    let csv_path = sidecar_path.with_file_name(&sidecar.data_file);
    let mut reader = csv::Reader::from_path(&csv_path).map_err(|e| parse_err(&csv_path, e))?;
    let headers = reader.headers().map_err(|e| parse_err(&csv_path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["tau1", "tau2", "rate"] {
        return Err(parse_err(&csv_path, format!("unexpected header {:?}", headers)));
    }
    let mut rows = Vec::with_capacity(sidecar.points);
    for (line, rec) in reader.deserialize::<(f64, f64, f64)>().enumerate() {
        rows.push(rec.map_err(|e| parse_err(&csv_path, format!("row {}: {e}", line + 1)))?);
    }
    if rows.len() != sidecar.points {
        return Err(parse_err(
            &csv_path,
            format!("{} rows, sidecar declares {}", rows.len(), sidecar.points),
        ));
    }
    let mut ig = Interferogram {
        scan_axis: sidecar.scan_axis,
        fixed_delay: sidecar.fixed_delay,
        delays: sidecar.delays,
        delays_2: sidecar.delays_2,
        rates: rows.iter().map(|r| r.2).collect(),
        engine: sidecar.engine,
        metadata: sidecar.metadata,
    };
    let expected = ig.pairs();
    if expected.len() != rows.len() {
        return Err(parse_err(&csv_path, "delay grid does not match the row count"));
    }
    for (k, (p, r)) in expected.iter().zip(&rows).enumerate() {
        let tol = 1e-9 * (1.0 + p.tau1.abs().max(p.tau2.abs()));
        if (p.tau1 - r.0).abs() > tol || (p.tau2 - r.1).abs() > tol {
            return Err(parse_err(&csv_path, format!("row {} delays ({}, {}) off the declared grid", k + 1, r.0, r.1)));
        }
    }
    ig.rates.shrink_to_fit();
    Ok(ig)
}

fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(text.as_bytes()).map_err(io_err(path))
}

pub fn write_density_csv(path: &Path, density: &SpectralDensity) -> Result<(), IoError> {
    let mut out = String::from("omega,value\n");
    for (w, v) in density.detunings.values().iter().zip(&density.values) {
        out.push_str(&format!("{w},{v}\n"));
    }
    write_text(path, &out)
}

pub fn write_jsi_csv(path: &Path, jsi: &JsiGrid) -> Result<(), IoError> {
    let mut out = String::from("omega_plus,omega_minus,value\n");
    let minus = jsi.minus.values();
    for (i, p) in jsi.plus.values().iter().enumerate() {
        for (j, m) in minus.iter().enumerate() {
            out.push_str(&format!("{p},{m},{}\n", jsi.at(i, j)));
        }
    }
    write_text(path, &out)
}

pub fn write_signal_idler_csv(path: &Path, jsi: &SignalIdlerJsi) -> Result<(), IoError> {
    let mut out = String::from("omega_s,omega_i,value\n");
    let idler = jsi.omega_i.values();
    for (a, s) in jsi.omega_s.values().iter().enumerate() {
        for (b, i) in idler.iter().enumerate() {
            out.push_str(&format!("{s},{i},{}\n", jsi.values[a * jsi.omega_i.len + b]));
        }
    }
    write_text(path, &out)
}

/// Envelope CSV keeping every `stride`-th sample.
pub fn write_envelope_csv(path: &Path, rates: &[f64], env: &EnvelopePair, stride: usize) -> Result<(), IoError> {
    let mut out = String::from("tau2,rate,upper,lower\n");
    for k in (0..env.delays.len).step_by(stride.max(1)) {
        out.push_str(&format!("{},{},{},{}\n", env.delays.at(k), rates[k], env.upper[k], env.lower[k]));
    }
    write_text(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::preset;
    use crate::freq_engine::scan;

    #[test]
    fn round_trip_through_either_file() {
        let (_, mut cfg) = preset("fig2c").unwrap().members.remove(0);
        cfg.scan.range.points = 101;
        cfg.scan.range.min = -0.1;
        cfg.scan.range.max = 0.1;
        let ig = scan(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = write_interferogram(dir.path(), "x", &ig, Some(&cfg), None).unwrap();
        assert_eq!(read_interferogram(&files.sidecar).unwrap(), ig);
        assert_eq!(read_interferogram(&files.csv).unwrap(), ig);
    }

    #[test]
    fn truncated_csv_is_a_parse_error() {
        let (_, mut cfg) = preset("fig2c").unwrap().members.remove(0);
        cfg.scan.range.points = 11;
        cfg.scan.range.min = -0.01;
        cfg.scan.range.max = 0.01;
        let ig = scan(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = write_interferogram(dir.path(), "x", &ig, None, None).unwrap();
        let text = fs::read_to_string(&files.csv).unwrap();
        fs::write(&files.csv, &text[..text.len() / 2]).unwrap();
        assert!(matches!(read_interferogram(&files.csv), Err(IoError::Parse { .. })));
    }
}
