use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BreathingType, DatasetError, Result, Sex, SubjectMeta, TrialMeta};

/// A validated list of trials. Entry paths are resolved against the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub provenance: String,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub meta: TrialMeta,
}

// Loose mirror of the JSON layout so invariant violations can be reported by
// field name instead of as generic type errors.
#[derive(Debug, Serialize, Deserialize)]
struct RawManifest {
    provenance: String,
    trials: Vec<RawTrial>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawTrial {
    path: String,
    subject: RawSubject,
    breathing_type: String,
    peep_cmh2o: f64,
    fs_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    duration_s: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawSubject {
    subject_id: String,
    sex: String,
    age: i64,
    height_cm: f64,
    weight_kg: f64,
    smoker_or_vaper: bool,
    asthmatic: bool,
}

impl RawSubject {
    fn into_meta(self) -> Result<SubjectMeta> {
        let sex = match self.sex.trim() {
            "M" | "m" => Sex::M,
            "F" | "f" => Sex::F,
            _ => return Err(DatasetError::SchemaViolation("sex".into())),
        };
        if self.age <= 0 || self.age > i64::from(u32::MAX) {
            return Err(DatasetError::SchemaViolation("age".into()));
        }
        let meta = SubjectMeta {
            subject_id: self.subject_id,
            sex,
            age: self.age as u32,
            height_cm: self.height_cm,
            weight_kg: self.weight_kg,
            smoker_or_vaper: self.smoker_or_vaper,
            asthmatic: self.asthmatic,
        };
        meta.validate()?;
        Ok(meta)
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => DatasetError::MissingFile(path.to_path_buf()),
        _ => DatasetError::IoFailure {
            path: path.to_path_buf(),
            source: e,
        },
    })?;
    let raw: RawManifest = serde_json::from_str(&text)
        .map_err(|e| DatasetError::SchemaViolation(e.to_string()))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));

    let mut seen = BTreeSet::new();
    let mut entries = Vec::with_capacity(raw.trials.len());
    for t in raw.trials {
        let breathing_type = BreathingType::parse(&t.breathing_type)
            .ok_or_else(|| DatasetError::SchemaViolation("breathing_type".into()))?;
        let meta = TrialMeta {
            subject: t.subject.into_meta()?,
            breathing_type,
            peep_cmh2o: t.peep_cmh2o,
            nominal_fs: t.fs_hz,
            duration_s: t.duration_s,
        };
        meta.validate()?;
        if !seen.insert((meta.subject.subject_id.clone(), breathing_type)) {
            return Err(DatasetError::DuplicateTrial {
                subject_id: meta.subject.subject_id.clone(),
                breathing_type,
            });
        }
        let trial_path = base.join(&t.path);
        if !trial_path.is_file() {
            return Err(DatasetError::MissingFile(trial_path));
        }
        entries.push(ManifestEntry {
            path: trial_path,
            meta,
        });
    }
    Ok(DatasetManifest {
        provenance: raw.provenance,
        entries,
    })
}

/// Writes a manifest. Entry paths are written relative to the manifest's
/// directory when possible.
pub fn write_manifest(manifest: &DatasetManifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let trials = manifest
        .entries
        .iter()
        .map(|e| {
            let rel = e.path.strip_prefix(base).unwrap_or(&e.path);
            let s = &e.meta.subject;
            RawTrial {
                path: rel.to_string_lossy().replace('\\', "/"),
                subject: RawSubject {
                    subject_id: s.subject_id.clone(),
                    sex: match s.sex {
                        Sex::M => "M".into(),
                        Sex::F => "F".into(),
                    },
                    age: i64::from(s.age),
                    height_cm: s.height_cm,
                    weight_kg: s.weight_kg,
                    smoker_or_vaper: s.smoker_or_vaper,
                    asthmatic: s.asthmatic,
                },
                breathing_type: e.meta.breathing_type.name().into(),
                peep_cmh2o: e.meta.peep_cmh2o,
                fs_hz: e.meta.nominal_fs,
                duration_s: e.meta.duration_s,
            }
        })
        .collect();
    let raw = RawManifest {
        provenance: manifest.provenance.clone(),
        trials,
    };
    let mut text = serde_json::to_string_pretty(&raw).expect("manifest serializes");
    text.push('\n');
    fs::write(path, text).map_err(|source| DatasetError::IoFailure {
        path: path.to_path_buf(),
        source,
    })
}
