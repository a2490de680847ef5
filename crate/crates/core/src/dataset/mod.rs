//! Trial records, subject metadata and the on-disk dataset layout.
//!
//! A dataset is a JSON manifest plus one headered CSV per trial:
//!
//! ```text
//! time_s,pressure_cmh2o,flow_lps,tidal_volume_l,insp_start,chest_mm,abdomen_mm
//! ```
//!
//! `insp_start` is a 0/1 marker column. Missing cells (`NaN` or empty) are kept
//! as NaN at this stage; they are removed by [`crate::preprocess::drop_nan_rows`].

mod convert;
mod manifest;
mod synthetic;
mod trial_csv;

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use convert::{convert_table, ColumnMapping, ColumnSource};
pub use manifest::{load_manifest, write_manifest, DatasetManifest, ManifestEntry};
pub use synthetic::{
    generate_cohort, generate_synthetic_trial, ClassProfile, CohortSpec, SyntheticSpec,
};
pub use trial_csv::{load_trial, write_trial, TRIAL_HEADER};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("missing file: {0}")]
    MissingFile(PathBuf),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("duplicate trial for subject {subject_id} ({breathing_type})")]
    DuplicateTrial {
        subject_id: String,
        breathing_type: BreathingType,
    },
    #[error("bad header: expected `{expected}`, found `{found}`")]
    BadHeader { expected: String, found: String },
    #[error("time is not strictly increasing at data row {0}")]
    NonMonotoneTime(usize),
    #[error("data row {0} has the wrong number of fields")]
    RaggedRow(usize),
    #[error("unparseable value `{value}` at data row {row}")]
    BadValue { row: usize, value: String },
    #[error("trial needs at least 2 rows, found {0}")]
    TooFewRows(usize),
    #[error("median sample interval {found_s} s differs from 1/fs = {expected_s} s by more than 1%")]
    SampleRateMismatch { expected_s: f64, found_s: f64 },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("I/O failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, DatasetError>;

/// Breathing pattern class. The integer codes are the label values used by
/// every model and report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BreathingType {
    Normal = 0,
    Panting = 1,
    Deep = 2,
}

impl BreathingType {
    pub const ALL: [BreathingType; 3] = [
        BreathingType::Normal,
        BreathingType::Panting,
        BreathingType::Deep,
    ];
    pub const COUNT: usize = 3;

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            BreathingType::Normal => "normal",
            BreathingType::Panting => "panting",
            BreathingType::Deep => "deep",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s.trim()))
    }
}

impl fmt::Display for BreathingType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sex {
    M,
    F,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectMeta {
    pub subject_id: String,
    pub sex: Sex,
    pub age: u32,
    pub height_cm: f64,
    pub weight_kg: f64,
    pub smoker_or_vaper: bool,
    pub asthmatic: bool,
}

impl SubjectMeta {
    pub fn validate(&self) -> Result<()> {
        if self.subject_id.is_empty() {
            return Err(DatasetError::SchemaViolation("subject_id".into()));
        }
        if self.age == 0 {
            return Err(DatasetError::SchemaViolation("age".into()));
        }
        if !(self.height_cm > 0.0 && self.height_cm.is_finite()) {
            return Err(DatasetError::SchemaViolation("height_cm".into()));
        }
        if !(self.weight_kg > 0.0 && self.weight_kg.is_finite()) {
            return Err(DatasetError::SchemaViolation("weight_kg".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMeta {
    pub subject: SubjectMeta,
    pub breathing_type: BreathingType,
    pub peep_cmh2o: f64,
    pub nominal_fs: f64,
    /// Known from the manifest when listed there; always set on a loaded record.
    pub duration_s: Option<f64>,
}

impl TrialMeta {
    pub fn validate(&self) -> Result<()> {
        self.subject.validate()?;
        if !(self.peep_cmh2o >= 0.0 && self.peep_cmh2o.is_finite()) {
            return Err(DatasetError::SchemaViolation("peep_cmh2o".into()));
        }
        if !(self.nominal_fs > 0.0 && self.nominal_fs.is_finite()) {
            return Err(DatasetError::SchemaViolation("fs_hz".into()));
        }
        if let Some(d) = self.duration_s {
            if !(d > 0.0 && d.is_finite()) {
                return Err(DatasetError::SchemaViolation("duration_s".into()));
            }
        }
        Ok(())
    }

    /// `<subject_id>_<breathing type>`, unique within a valid manifest.
    pub fn trial_id(&self) -> String {
        format!("{}_{}", self.subject.subject_id, self.breathing_type)
    }
}

/// Signal channels of a trial, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Pressure,
    Flow,
    TidalVolume,
    ChestCirc,
    AbdomenCirc,
}

impl Channel {
    pub const ALL: [Channel; 5] = [
        Channel::Pressure,
        Channel::Flow,
        Channel::TidalVolume,
        Channel::ChestCirc,
        Channel::AbdomenCirc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Pressure => "pressure",
            Channel::Flow => "flow",
            Channel::TidalVolume => "tidal_volume",
            Channel::ChestCirc => "chest_circ",
            Channel::AbdomenCirc => "abdomen_circ",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Channel::Pressure => "cmH2O",
            Channel::Flow => "L/s",
            Channel::TidalVolume => "L",
            Channel::ChestCirc | Channel::AbdomenCirc => "mm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s.trim())
    }
}

/// One breathing trial: uniformly sampled channels plus metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub meta: TrialMeta,
    pub time: Vec<f64>,
    pub pressure: Vec<f64>,
    pub flow: Vec<f64>,
    pub tidal_volume: Vec<f64>,
    pub chest_circ: Vec<f64>,
    pub abdomen_circ: Vec<f64>,
    pub insp_starts: Vec<usize>,
}

impl TrialRecord {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn trial_id(&self) -> String {
        self.meta.trial_id()
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

    /// Checks the record invariants. NaN cells are allowed; time stamps that
    /// are present must be strictly increasing.
    pub fn validate(&self) -> Result<()> {
        let n = self.time.len();
        if n < 2 {
            return Err(DatasetError::TooFewRows(n));
        }
        for c in Channel::ALL {
            if self.channel(c).len() != n {
                return Err(DatasetError::SchemaViolation(format!(
                    "{} length {} != {}",
                    c.name(),
                    self.channel(c).len(),
                    n
                )));
            }
        }
        check_time_axis(&self.time, self.meta.nominal_fs)?;
        if self.insp_starts.windows(2).any(|w| w[0] >= w[1])
            || self.insp_starts.last().is_some_and(|&i| i >= n)
        {
            return Err(DatasetError::SchemaViolation("insp_starts".into()));
        }
        Ok(())
    }
}

pub(crate) fn check_time_axis(time: &[f64], fs: f64) -> Result<()> {
    let mut last: Option<f64> = None;
    let mut intervals = Vec::with_capacity(time.len());
    for (row, &t) in time.iter().enumerate() {
        if t.is_nan() {
            continue;
        }
        if let Some(prev) = last {
            if t <= prev {
                return Err(DatasetError::NonMonotoneTime(row));
            }
            intervals.push(t - prev);
        }
        last = Some(t);
    }
    if intervals.is_empty() {
        return Ok(());
    }
    intervals.sort_by(f64::total_cmp);
    let median = intervals[intervals.len() / 2];
    let expected = 1.0 / fs;
    if (median - expected).abs() > 0.01 * expected {
        return Err(DatasetError::SampleRateMismatch {
            expected_s: expected,
            found_s: median,
        });
    }
    Ok(())
}
