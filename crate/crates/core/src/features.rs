//! Window summary statistics and the optional breathing-rate column.
//!
//! Each window becomes `[mean, std, min, max, rms]` for every channel in
//! canonical order (25 values). With the breathing rate enabled, its value in
//! breaths per minute is appended as column 26, so the without-BR matrix is
//! just the first 25 columns.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{BreathingType, Channel};
use crate::matrix::Matrix;
use crate::preprocess::Window;
use crate::spectral::{estimate_breathing_rate, SpectralError};

pub const STATS: [&str; 5] = ["mean", "std", "min", "max", "rms"];
pub const BASE_FEATURES: usize = STATS.len() * Channel::ALL.len();
pub const BR_FEATURE: &str = "br_bpm";

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("no windows to assemble")]
    EmptyInput,
    #[error("breathing-rate estimate failed for window {window}: {source}")]
    Spectral {
        window: usize,
        #[source]
        source: SpectralError,
    },
    #[error("non-finite feature {feature} in window {window}")]
    NonFinite { window: usize, feature: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub label: BreathingType,
    pub group_id: String,
    pub trial_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub rows: Vec<FeatureVector>,
    pub feature_names: Vec<String>,
    pub includes_br: bool,
    /// Rows whose window spans fewer than two cycles at its estimated rate.
    /// Only populated when the breathing-rate column is computed.
    pub low_cycle_rows: Vec<usize>,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn to_matrix(&self) -> Matrix {
        let rows: Vec<&[f64]> = self.rows.iter().map(|r| r.values.as_slice()).collect();
        Matrix::from_rows(&rows).expect("feature rows share one length")
    }

    pub fn labels(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.label.code()).collect()
    }

    pub fn groups(&self) -> Vec<&str> {
        self.rows.iter().map(|r| r.group_id.as_str()).collect()
    }

    /// The same rows with the breathing-rate column removed.
    pub fn without_br(&self) -> FeatureMatrix {
        if !self.includes_br {
            return self.clone();
        }
        FeatureMatrix {
            rows: self
                .rows
                .iter()
                .map(|r| FeatureVector {
                    values: r.values[..BASE_FEATURES].to_vec(),
                    ..r.clone()
                })
                .collect(),
            feature_names: self.feature_names[..BASE_FEATURES].to_vec(),
            includes_br: false,
            low_cycle_rows: self.low_cycle_rows.clone(),
        }
    }

    /// CSV with the feature names followed by `label,group_id,trial_id`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{},label,group_id,trial_id", self.feature_names.join(","))?;
        for r in &self.rows {
            for v in &r.values {
                write!(w, "{v},")?;
            }
            writeln!(w, "{},{},{}", r.label, r.group_id, r.trial_id)?;
        }
        Ok(())
    }
}

pub fn feature_names(include_br: bool) -> Vec<String> {
    let mut names: Vec<String> = Channel::ALL
        .iter()
        .flat_map(|c| STATS.iter().map(move |s| format!("{}_{}", c.name(), s)))
        .collect();
    if include_br {
        names.push(BR_FEATURE.to_string());
    }
    names
}

fn channel_stats(x: &[f64]) -> [f64; 5] {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    [mean, var.sqrt(), min, max, rms]
}

pub fn window_features(window: &Window) -> Vec<f64> {
    channel_features(Channel::ALL.map(|c| window.channel(c)))
}

/// Summary statistics of five channel slices given in [`Channel::ALL`] order.
pub fn channel_features(channels: [&[f64]; 5]) -> Vec<f64> {
    channels.into_iter().flat_map(channel_stats).collect()
}

pub fn assemble_matrix(
    windows: &[Window],
    include_br: bool,
    br_band: (f64, f64),
) -> Result<FeatureMatrix, FeatureError> {
    assemble_matrix_with(windows, include_br, br_band, Channel::TidalVolume)
}

/// As [`assemble_matrix`], with the breathing rate taken from `br_channel`.
pub fn assemble_matrix_with(
    windows: &[Window],
    include_br: bool,
    br_band: (f64, f64),
    br_channel: Channel,
) -> Result<FeatureMatrix, FeatureError> {
    if windows.is_empty() {
        return Err(FeatureError::EmptyInput);
    }
    let names = feature_names(include_br);
    let mut rows = Vec::with_capacity(windows.len());
    let mut low_cycle_rows = Vec::new();
    for (i, w) in windows.iter().enumerate() {
        let mut values = window_features(w);
        if include_br {
            let est = estimate_breathing_rate(w.channel(br_channel), w.fs, br_band)
                .map_err(|source| FeatureError::Spectral { window: i, source })?;
            if est.peak_freq_hz * w.duration_s() < 2.0 {
                low_cycle_rows.push(i);
            }
            values.push(est.bpm);
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite {
                window: i,
                feature: names[j].clone(),
            });
        }
        rows.push(FeatureVector {
            values,
            label: w.breathing_type,
            group_id: w.subject_id.clone(),
            trial_id: w.trial_id(),
        });
    }
    Ok(FeatureMatrix {
        rows,
        feature_names: names,
        includes_br: include_br,
        low_cycle_rows,
    })
}
