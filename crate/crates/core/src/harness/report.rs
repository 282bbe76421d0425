use serde::{Serialize, Serializer};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
#[error("{path}: {msg}")]
pub struct OutputError {
    pub path: PathBuf,
    pub msg: String,
}

fn out_err(path: &Path, e: impl ToString) -> OutputError {
    OutputError {
        path: path.to_path_buf(),
        msg: e.to_string(),
    }
}

/// Rounds to `digits` decimals. Never returns `-0.0`.
pub fn round_to(x: f64, digits: i32) -> f64 {
    let s = 10f64.powi(digits);
    let r = (x * s).round() / s;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

pub fn deg(x_rad: f64) -> f64 {
    round_to(x_rad.to_degrees(), 4)
}

pub fn deg_opt(x_rad: Option<f64>) -> Option<f64> {
    x_rad.map(deg)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), OutputError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| out_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| out_err(path, e))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), OutputError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| out_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| out_err(path, e))?;
    }
    w.flush().map_err(|e| out_err(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<(), OutputError> {
    fs::create_dir_all(dir).map_err(|e| out_err(dir, e))
}

fn spread_or_degenerate<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(x) => s.serialize_f64(*x),
        None => s.serialize_str("degenerate"),
    }
}

/// One tomography result in the layout of the published results table.
/// Angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1Row {
    pub point: String,
    pub theta_t: Option<f64>,
    pub phi_t: Option<f64>,
    pub theta_e: f64,
    pub d_theta: f64,
    pub phi_e: f64,
    /// `"degenerate"` inside a polar cap.
    #[serde(serialize_with = "spread_or_degenerate")]
    pub d_phi: Option<f64>,
    pub fidelity: Option<f64>,
    pub d_fidelity: Option<f64>,
    pub branch: String,
}
