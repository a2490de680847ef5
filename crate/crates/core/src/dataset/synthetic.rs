//! Parametric trial generator for desk-scale testing.
//!
//! Tidal volume follows `(A/2)(1 - cos 2πft)`; flow is its exact derivative,
//! pressure oscillates around PEEP and the circumference bands are affine in
//! the noiseless volume. Gaussian noise is scaled per channel by the
//! channel's own peak-to-peak range.

use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{BreathingType, DatasetError, Result, Sex, SubjectMeta, TrialMeta, TrialRecord};
use crate::rng::{derive_seed, fnv1a, rng_from_seed};

const CHEST_OFFSET_MM: f64 = 900.0;
const CHEST_GAIN_MM_PER_L: f64 = 40.0;
const ABDOMEN_OFFSET_MM: f64 = 850.0;
const ABDOMEN_GAIN_MM_PER_L: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub breathing_frequency_hz: f64,
    pub duration_s: f64,
    pub fs_hz: f64,
    pub tidal_amplitude_l: f64,
    pub peep_cmh2o: f64,
    pub noise_std_fraction: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Generator defaults for a breathing type: normal 0.25 Hz / 0.5 L / 65 s,
    /// panting 1.5 Hz / 0.3 L / 35 s, deep 0.15 Hz / 1.5 L / 65 s, at 100 Hz.
    pub fn for_type(breathing_type: BreathingType, seed: u64) -> Self {
        let p = ClassProfile::default_for(breathing_type);
        SyntheticSpec {
            breathing_frequency_hz: p.frequency_hz,
            duration_s: p.duration_s,
            fs_hz: 100.0,
            tidal_amplitude_l: p.amplitude_l,
            peep_cmh2o: 5.0,
            noise_std_fraction: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(DatasetError::InvalidSpec(m.to_string()));
        if !(self.fs_hz > 0.0 && self.fs_hz.is_finite()) {
            return bad("fs_hz must be positive");
        }
        if !(self.breathing_frequency_hz > 0.0 && self.breathing_frequency_hz < self.fs_hz / 2.0)
        {
            return bad("breathing_frequency_hz must lie in (0, fs/2)");
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad("duration_s must be positive");
        }
        if !(self.tidal_amplitude_l > 0.0 && self.tidal_amplitude_l.is_finite()) {
            return bad("tidal_amplitude_l must be positive");
        }
        if !(self.peep_cmh2o >= 0.0 && self.peep_cmh2o.is_finite()) {
            return bad("peep_cmh2o must be non-negative");
        }
        if !(0.0..1.0).contains(&self.noise_std_fraction) {
            return bad("noise_std_fraction must lie in [0, 1)");
        }
        if ((self.duration_s * self.fs_hz).round() as usize) < 2 {
            return bad("trial must contain at least 2 samples");
        }
        Ok(())
    }
}

fn peak_to_peak(x: &[f64]) -> f64 {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    hi - lo
}

/// Generates one trial. The result is a pure function of the arguments; the
/// noise stream is keyed by the spec seed, the subject id and the class.
pub fn generate_synthetic_trial(
    spec: &SyntheticSpec,
    breathing_type: BreathingType,
    subject: &SubjectMeta,
) -> Result<TrialRecord> {
    spec.validate()?;
    let n = (spec.duration_s * spec.fs_hz).round() as usize;
    let f = spec.breathing_frequency_hz;
    let a = spec.tidal_amplitude_l;
    let w = 2.0 * PI * f;

    let time: Vec<f64> = (0..n).map(|i| i as f64 / spec.fs_hz).collect();
    let volume: Vec<f64> = time.iter().map(|&t| 0.5 * a * (1.0 - (w * t).cos())).collect();
    let mut channels = [
        time.iter()
            .map(|&t| spec.peep_cmh2o + 0.5 * a * (w * t).sin())
            .collect::<Vec<_>>(),
        time.iter().map(|&t| 0.5 * a * w * (w * t).sin()).collect(),
        volume.clone(),
        volume
            .iter()
            .map(|&v| CHEST_OFFSET_MM + CHEST_GAIN_MM_PER_L * v)
            .collect(),
        volume
            .iter()
            .map(|&v| ABDOMEN_OFFSET_MM + ABDOMEN_GAIN_MM_PER_L * v)
            .collect(),
    ];

    if spec.noise_std_fraction > 0.0 {
        let key = spec.seed
            ^ fnv1a(subject.subject_id.as_bytes())
            ^ (breathing_type.code() as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut rng = rng_from_seed(key);
        for ch in channels.iter_mut() {
            let std = spec.noise_std_fraction * peak_to_peak(ch);
            if std > 0.0 {
                let normal = Normal::new(0.0, std).expect("finite positive std");
                for v in ch.iter_mut() {
                    *v += normal.sample(&mut rng);
                }
            }
        }
    }

    let period_samples = spec.fs_hz / f;
    let insp_starts: Vec<usize> = (0..)
        .map(|k| (k as f64 * period_samples).round() as usize)
        .take_while(|&i| i < n)
        .collect();

    let [pressure, flow, tidal_volume, chest_circ, abdomen_circ] = channels;
    Ok(TrialRecord {
        meta: TrialMeta {
            subject: subject.clone(),
            breathing_type,
            peep_cmh2o: spec.peep_cmh2o,
            nominal_fs: spec.fs_hz,
            duration_s: Some(n as f64 / spec.fs_hz),
        },
        time,
        pressure,
        flow,
        tidal_volume,
        chest_circ,
        abdomen_circ,
        insp_starts,
    })
}

/// Frequency, amplitude and duration for one class in a synthetic cohort.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile {
    pub frequency_hz: f64,
    pub amplitude_l: f64,
    pub duration_s: f64,
}

impl ClassProfile {
    pub fn default_for(breathing_type: BreathingType) -> Self {
        match breathing_type {
            BreathingType::Normal => ClassProfile {
                frequency_hz: 0.25,
                amplitude_l: 0.5,
                duration_s: 65.0,
            },
            BreathingType::Panting => ClassProfile {
                frequency_hz: 1.5,
                amplitude_l: 0.3,
                duration_s: 35.0,
            },
            BreathingType::Deep => ClassProfile {
                frequency_hz: 0.15,
                amplitude_l: 1.5,
                duration_s: 65.0,
            },
        }
    }
}

/// Cohort description consumed by `respira generate`. Every field has a
/// default, so `{}` is a valid spec (30 subjects, three trials each).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortSpec {
    pub provenance: String,
    pub n_subjects: usize,
    pub seed: u64,
    pub fs_hz: f64,
    pub peep_cmh2o: f64,
    pub noise_std_fraction: f64,
    /// Relative half-width of the uniform per-subject frequency jitter.
    pub frequency_jitter: f64,
    /// Relative half-width of the uniform per-subject amplitude jitter.
    pub amplitude_jitter: f64,
    pub normal: ClassProfile,
    pub panting: ClassProfile,
    pub deep: ClassProfile,
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec {
            provenance: "synthetic cohort".into(),
            n_subjects: 30,
            seed: 20_240_101,
            fs_hz: 100.0,
            peep_cmh2o: 5.0,
            noise_std_fraction: 0.05,
            frequency_jitter: 0.15,
            amplitude_jitter: 0.2,
            normal: ClassProfile::default_for(BreathingType::Normal),
            panting: ClassProfile::default_for(BreathingType::Panting),
            deep: ClassProfile::default_for(BreathingType::Deep),
        }
    }
}

impl CohortSpec {
    pub fn profile(&self, breathing_type: BreathingType) -> ClassProfile {
        match breathing_type {
            BreathingType::Normal => self.normal,
            BreathingType::Panting => self.panting,
            BreathingType::Deep => self.deep,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subjects == 0 {
            return Err(DatasetError::InvalidSpec("n_subjects must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.frequency_jitter) || !(0.0..1.0).contains(&self.amplitude_jitter)
        {
            return Err(DatasetError::InvalidSpec("jitter must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Generates `n_subjects × 3` trials, subject-major, in class-code order.
pub fn generate_cohort(spec: &CohortSpec) -> Result<Vec<TrialRecord>> {
    spec.validate()?;
    let mut trials = Vec::with_capacity(spec.n_subjects * BreathingType::COUNT);
    let width = spec.n_subjects.to_string().len().max(2);
    for s in 0..spec.n_subjects {
        let mut rng = rng_from_seed(derive_seed(spec.seed, s as u64));
        let sex = if s % 2 == 0 { Sex::M } else { Sex::F };
        let height_cm: f64 = match sex {
            Sex::M => rng.random_range(165.0..192.0),
            Sex::F => rng.random_range(152.0..178.0),
        };
        let bmi: f64 = rng.random_range(19.0..27.0);
        let subject = SubjectMeta {
            subject_id: format!("S{:0width$}", s + 1),
            sex,
            age: rng.random_range(19..=37),
            height_cm: (height_cm * 10.0).round() / 10.0,
            weight_kg: (bmi * (height_cm / 100.0).powi(2) * 10.0).round() / 10.0,
            smoker_or_vaper: false,
            asthmatic: false,
        };
        for t in BreathingType::ALL {
            let p = spec.profile(t);
            let fj = 1.0 + rng.random_range(-1.0..=1.0) * spec.frequency_jitter;
            let aj = 1.0 + rng.random_range(-1.0..=1.0) * spec.amplitude_jitter;
            let trial_spec = SyntheticSpec {
                breathing_frequency_hz: p.frequency_hz * fj,
                duration_s: p.duration_s,
                fs_hz: spec.fs_hz,
                tidal_amplitude_l: p.amplitude_l * aj,
                peep_cmh2o: spec.peep_cmh2o,
                noise_std_fraction: spec.noise_std_fraction,
                seed: derive_seed(spec.seed, 1_000_000 + (s * BreathingType::COUNT + t.code()) as u64),
            };
            trials.push(generate_synthetic_trial(&trial_spec, t, &subject)?);
        }
    }
    Ok(trials)
}
