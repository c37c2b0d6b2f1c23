//! CSV row types and readers.

use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackRow {
    pub step: usize,
    pub track_id: u64,
    pub existence: f64,
    pub px: f64,
    pub py: f64,
    pub vx: f64,
    pub vy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseRow {
    pub step: usize,
    pub dict: usize,
    pub eta_hat: f64,
    pub eta_true: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagRow {
    pub step: usize,
    pub n_pos: usize,
    pub n_new: usize,
    pub n_pruned: usize,
    pub n_declared: usize,
    pub iterations: usize,
    pub min_kin_ess: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionRow {
    pub step: usize,
    pub x: f64,
    pub y: f64,
    pub score: f64,
    pub cell: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GospaRunRow {
    pub method: String,
    pub run: usize,
    pub step: usize,
    pub gospa: f64,
    pub localization: f64,
    pub missed: f64,
    pub false_est: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GospaLongRow {
    pub method: String,
    pub step: usize,
    pub mean_gospa: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub n_runs: usize,
    pub window_start: usize,
    pub window_end: usize,
    pub window_mean_gospa: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseReportRow {
    pub dict: usize,
    pub step: usize,
    pub eta_true: f64,
    pub mean_eta_hat: f64,
    pub mean_rel_error: f64,
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| with_path(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| with_path(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Err(HarnessError::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "file not found")));
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| with_path(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| with_path(path, e))).collect()
}

fn with_path(path: &Path, e: csv::Error) -> HarnessError {
    match HarnessError::from(e) {
        HarnessError::Io { source, .. } => HarnessError::io(path, source),
        HarnessError::Data { message, .. } => HarnessError::data(path, message),
        other => other,
    }
}

/// Positions per step `1..=n_steps` from track rows.
pub fn positions_by_step(rows: &[TrackRow], n_steps: usize) -> Vec<Vec<[f64; 2]>> {
    let mut out = vec![Vec::new(); n_steps];
    for r in rows {
        if (1..=n_steps).contains(&r.step) {
            out[r.step - 1].push([r.px, r.py]);
        }
    }
    out
}
