//! NaN-row removal, z-score scaling and fixed-length windowing.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{BreathingType, Channel, TrialRecord};
use crate::matrix::Matrix;

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("fewer than 2 rows survive NaN removal ({0} left)")]
    AllRowsDropped(usize),
    #[error("cannot fit a scaler on an empty matrix")]
    EmptyMatrix,
    #[error("non-finite value in scaler input at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("scaler fitted on {expected} columns, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("overlap fraction {0} outside [0, 1)")]
    InvalidOverlap(f64),
    #[error("window of {0} samples is too short (need at least 2)")]
    WindowTooShort(usize),
}

/// Keeps exactly the rows in which every channel (time included) is finite.
/// Inspiratory markers on dropped rows are discarded; the rest are re-indexed.
pub fn drop_nan_rows(record: &TrialRecord) -> Result<TrialRecord, PreprocessError> {
    let n = record.len();
    let keep: Vec<bool> = (0..n)
        .map(|i| {
            record.time[i].is_finite()
                && Channel::ALL
                    .iter()
                    .all(|&c| record.channel(c)[i].is_finite())
        })
        .collect();
    let survivors = keep.iter().filter(|&&k| k).count();
    if survivors < 2 {
        return Err(PreprocessError::AllRowsDropped(survivors));
    }

    let filter = |x: &[f64]| -> Vec<f64> {
        x.iter()
            .zip(&keep)
            .filter_map(|(&v, &k)| k.then_some(v))
            .collect()
    };
    // new index of each surviving row
    let mut new_index = vec![usize::MAX; n];
    let mut next = 0;
    for (i, &k) in keep.iter().enumerate() {
        if k {
            new_index[i] = next;
            next += 1;
        }
    }
    let insp_starts = record
        .insp_starts
        .iter()
        .filter(|&&i| i < n && keep[i])
        .map(|&i| new_index[i])
        .collect();

    let mut meta = record.meta.clone();
    if survivors != n {
        meta.duration_s = Some(survivors as f64 / meta.nominal_fs);
    }
    Ok(TrialRecord {
        meta,
        time: filter(&record.time),
        pressure: filter(&record.pressure),
        flow: filter(&record.flow),
        tidal_volume: filter(&record.tidal_volume),
        chest_circ: filter(&record.chest_circ),
        abdomen_circ: filter(&record.abdomen_circ),
        insp_starts,
    })
}

/// Per-column standardization parameters (population std, divisor n).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

const CONSTANT_COLUMN_STD: f64 = 1e-12;

impl ScalerParams {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

pub fn zscore_fit(matrix: &Matrix) -> Result<ScalerParams, PreprocessError> {
    let (n, d) = (matrix.rows(), matrix.cols());
    if n == 0 {
        return Err(PreprocessError::EmptyMatrix);
    }
    for (row, r) in matrix.iter_rows().enumerate() {
        if let Some(col) = r.iter().position(|v| !v.is_finite()) {
            return Err(PreprocessError::NonFinite { row, col });
        }
    }
    let mut mean = vec![0.0; d];
    for r in matrix.iter_rows() {
        for (m, &v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; d];
    for r in matrix.iter_rows() {
        for ((s, &v), &m) in var.iter_mut().zip(r).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var
        .into_iter()
        .map(|s| {
            let sd = (s / n as f64).sqrt();
            if sd < CONSTANT_COLUMN_STD {
                1.0
            } else {
                sd
            }
        })
        .collect();
    Ok(ScalerParams { mean, std })
}

pub fn zscore_apply(params: &ScalerParams, matrix: &Matrix) -> Result<Matrix, PreprocessError> {
    if matrix.cols() != params.dim() {
        return Err(PreprocessError::DimensionMismatch {
            expected: params.dim(),
            found: matrix.cols(),
        });
    }
    let mut out = matrix.clone();
    for i in 0..out.rows() {
        zscore_apply_row(params, out.row_mut(i));
    }
    Ok(out)
}

/// In-place scaling of a single row whose length is already checked.
pub fn zscore_apply_row(params: &ScalerParams, row: &mut [f64]) {
    for ((v, m), s) in row.iter_mut().zip(&params.mean).zip(&params.std) {
        *v = (*v - m) / s;
    }
}

/// A contiguous slice of a cleaned trial with its class label.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub subject_id: String,
    pub breathing_type: BreathingType,
    pub start_index: usize,
    pub length: usize,
    pub fs: f64,
    pub pressure: Vec<f64>,
    pub flow: Vec<f64>,
    pub tidal_volume: Vec<f64>,
    pub chest_circ: Vec<f64>,
    pub abdomen_circ: Vec<f64>,
}

impl Window {
    pub fn label(&self) -> BreathingType {
        self.breathing_type
    }

    pub fn trial_id(&self) -> String {
        format!("{}_{}", self.subject_id, self.breathing_type)
    }

    pub fn channel(&self, channel: Channel) -> &[f64] {
        match channel {
            Channel::Pressure => &self.pressure,
            Channel::Flow => &self.flow,
            Channel::TidalVolume => &self.tidal_volume,
            Channel::ChestCirc => &self.chest_circ,
            Channel::AbdomenCirc => &self.abdomen_circ,
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.length as f64 / self.fs
    }
}

/// Window length and stride in samples for a sampling rate.
pub fn window_geometry(
    fs: f64,
    window_s: f64,
    overlap_fraction: f64,
) -> Result<(usize, usize), PreprocessError> {
    if !(0.0..1.0).contains(&overlap_fraction) {
        return Err(PreprocessError::InvalidOverlap(overlap_fraction));
    }
    let len = (window_s * fs).round();
    if !(len >= 2.0) {
        return Err(PreprocessError::WindowTooShort(len.max(0.0) as usize));
    }
    let len = len as usize;
    let stride = ((len as f64) * (1.0 - overlap_fraction)).round().max(1.0) as usize;
    Ok((len, stride))
}

/// Cuts a cleaned trial into windows of `round(window_s·fs)` samples at a
/// stride of `round(L·(1 − overlap))`. A trial shorter than one window
/// yields no windows.
pub fn segment_windows(
    record: &TrialRecord,
    window_s: f64,
    overlap_fraction: f64,
) -> Result<Vec<Window>, PreprocessError> {
    let fs = record.meta.nominal_fs;
    let (len, stride) = window_geometry(fs, window_s, overlap_fraction)?;
    let n = record.len();
    if n < len {
        return Ok(Vec::new());
    }
    let count = (n - len) / stride + 1;
    Ok((0..count)
        .map(|k| {
            let start = k * stride;
            let cut = |x: &[f64]| x[start..start + len].to_vec();
            Window {
                subject_id: record.meta.subject.subject_id.clone(),
                breathing_type: record.meta.breathing_type,
                start_index: start,
                length: len,
                fs,
                pressure: cut(&record.pressure),
                flow: cut(&record.flow),
                tidal_volume: cut(&record.tidal_volume),
                chest_circ: cut(&record.chest_circ),
                abdomen_circ: cut(&record.abdomen_circ),
            }
        })
        .collect())
}
