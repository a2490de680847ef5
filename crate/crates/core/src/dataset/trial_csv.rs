use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{check_time_axis, DatasetError, Result, TrialMeta, TrialRecord};

pub const TRIAL_HEADER: &str =
    "time_s,pressure_cmh2o,flow_lps,tidal_volume_l,insp_start,chest_mm,abdomen_mm";

const N_COLUMNS: usize = 7;

fn parse_cell(field: &str, row: usize) -> Result<f64> {
    let s = field.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("nan") {
        return Ok(f64::NAN);
    }
    s.parse::<f64>().map_err(|_| DatasetError::BadValue {
        row,
        value: s.to_string(),
    })
}

/// Reads a trial CSV. Row numbers in errors are 0-based data rows (the
/// header is not counted).
pub fn load_trial(path: impl AsRef<Path>, meta: TrialMeta) -> Result<TrialRecord> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => DatasetError::MissingFile(path.to_path_buf()),
        _ => DatasetError::IoFailure {
            path: path.to_path_buf(),
            source: e,
        },
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);

    let header = reader
        .headers()
        .map_err(|e| DatasetError::SchemaViolation(e.to_string()))?
        .iter()
        .map(str::trim)
        .collect::<Vec<_>>()
        .join(",");
    let header = header.trim_start_matches('\u{feff}');
    if header != TRIAL_HEADER {
        return Err(DatasetError::BadHeader {
            expected: TRIAL_HEADER.to_string(),
            found: header.to_string(),
        });
    }

    let mut rec = TrialRecord {
        meta,
        time: Vec::new(),
        pressure: Vec::new(),
        flow: Vec::new(),
        tidal_volume: Vec::new(),
        chest_circ: Vec::new(),
        abdomen_circ: Vec::new(),
        insp_starts: Vec::new(),
    };
    for (row, result) in reader.records().enumerate() {
        let record = result.map_err(|e| DatasetError::SchemaViolation(e.to_string()))?;
        if record.len() != N_COLUMNS {
            return Err(DatasetError::RaggedRow(row));
        }
        let mut v = [0.0; N_COLUMNS];
        for (slot, field) in v.iter_mut().zip(record.iter()) {
            *slot = parse_cell(field, row)?;
        }
        rec.time.push(v[0]);
        rec.pressure.push(v[1]);
        rec.flow.push(v[2]);
        rec.tidal_volume.push(v[3]);
        if v[4].is_finite() && v[4] != 0.0 {
            rec.insp_starts.push(row);
        }
        rec.chest_circ.push(v[5]);
        rec.abdomen_circ.push(v[6]);
    }

    let n = rec.time.len();
    if n < 2 {
        return Err(DatasetError::TooFewRows(n));
    }
    check_time_axis(&rec.time, rec.meta.nominal_fs)?;
    rec.meta.validate()?;
    rec.meta.duration_s = Some(n as f64 / rec.meta.nominal_fs);
    Ok(rec)
}

/// Writes a trial in the canonical CSV layout. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_trial(record: &TrialRecord, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| DatasetError::IoFailure {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{TRIAL_HEADER}").map_err(io_err)?;
    let mut markers = record.insp_starts.iter().peekable();
    for i in 0..record.len() {
        let marker = if markers.peek() == Some(&&i) {
            markers.next();
            1
        } else {
            0
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            record.time[i],
            record.pressure[i],
            record.flow[i],
            record.tidal_volume[i],
            marker,
            record.chest_circ[i],
            record.abdomen_circ[i]
        )
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{BreathingType, Sex, SubjectMeta};
    use std::fs;

    fn meta() -> TrialMeta {
        TrialMeta {
            subject: SubjectMeta {
                subject_id: "S1".into(),
                sex: Sex::M,
                age: 30,
                height_cm: 180.0,
                weight_kg: 80.0,
                smoker_or_vaper: false,
                asthmatic: false,
            },
            breathing_type: BreathingType::Normal,
            peep_cmh2o: 4.0,
            nominal_fs: 100.0,
            duration_s: None,
        }
    }

    fn write(dir: &Path, body: &str) -> std::path::PathBuf {
        let p = dir.join("trial.csv");
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn parses_three_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            &format!(
                "{TRIAL_HEADER}\n0,4.1,0.1,0.0,1,900,850\n0.01,4.2,NaN,0.001,0,900.1,850.1\n0.02,4.3,0.3,,0,900.2,850.2\n"
            ),
        );
        let r = load_trial(&p, meta()).unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r.insp_starts, vec![0]);
        assert!(r.flow[1].is_nan());
        assert!(r.tidal_volume[2].is_nan());
        assert_eq!(r.meta.duration_s, Some(0.03));
    }

    #[test]
    fn repeated_time_is_non_monotone() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            &format!("{TRIAL_HEADER}\n0,1,1,1,0,1,1\n0.01,1,1,1,0,1,1\n0.01,1,1,1,0,1,1\n"),
        );
        assert!(matches!(
            load_trial(&p, meta()),
            Err(DatasetError::NonMonotoneTime(2))
        ));
    }

    #[test]
    fn missing_flow_column_is_bad_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "time_s,pressure_cmh2o,tidal_volume_l,insp_start,chest_mm,abdomen_mm\n0,1,1,0,1,1\n",
        );
        assert!(matches!(
            load_trial(&p, meta()),
            Err(DatasetError::BadHeader { .. })
        ));
    }

    #[test]
    fn ragged_row_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            &format!("{TRIAL_HEADER}\n0,1,1,1,0,1,1\n0.01,1,1,1,0,1\n"),
        );
        assert!(matches!(
            load_trial(&p, meta()),
            Err(DatasetError::RaggedRow(1))
        ));
        assert!(matches!(
            load_trial(dir.path().join("absent.csv"), meta()),
            Err(DatasetError::MissingFile(_))
        ));
    }

    #[test]
    fn minimum_record_writes_two_rows() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = meta();
        m.duration_s = Some(0.02);
        let r = TrialRecord {
            meta: m,
            time: vec![0.0, 0.01],
            pressure: vec![4.0, 4.5],
            flow: vec![0.1, f64::NAN],
            tidal_volume: vec![0.0, 0.001],
            chest_circ: vec![900.0, 900.5],
            abdomen_circ: vec![850.0, 850.25],
            insp_starts: vec![1],
        };
        let p = dir.path().join("min.csv");
        write_trial(&r, &p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(2).unwrap().contains("NaN"));
        let back = load_trial(&p, r.meta.clone()).unwrap();
        assert_eq!(back.insp_starts, vec![1]);
        assert!(back.flow[1].is_nan());
        assert_eq!(back.pressure, r.pressure);
    }

    #[test]
    fn unwritable_location_is_io_failure() {
        let dir = tempfile::tempdir().unwrap();
        let r = TrialRecord {
            meta: meta(),
            time: vec![0.0, 0.01],
            pressure: vec![0.0; 2],
            flow: vec![0.0; 2],
            tidal_volume: vec![0.0; 2],
            chest_circ: vec![0.0; 2],
            abdomen_circ: vec![0.0; 2],
            insp_starts: vec![],
        };
        let p = dir.path().join("no/such/dir/t.csv");
        assert!(matches!(
            write_trial(&r, p),
            Err(DatasetError::IoFailure { .. })
        ));
    }
}
