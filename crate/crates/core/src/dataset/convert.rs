//! Column-mapping converter from foreign delimited tables to the canonical
//! trial layout.
//!
//! The mapping names a source column (by header) for every channel, with an
//! optional affine unit conversion `value · scale + offset`. Without a time
//! column, time stamps are `i / fs`. The inspiration marker may come from a
//! 0/1 column or from an explicit index list.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{check_time_axis, Channel, DatasetError, Result, TrialMeta, TrialRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSource {
    pub column: String,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub offset: f64,
}

fn one() -> f64 {
    1.0
}

fn comma() -> char {
    ','
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnMapping {
    #[serde(default = "comma")]
    pub delimiter: char,
    /// Lines to skip before the header row.
    #[serde(default)]
    pub skip_lines: usize,
    #[serde(default)]
    pub time: Option<ColumnSource>,
    /// Keyed by canonical channel name (`pressure`, `flow`, `tidal_volume`,
    /// `chest_circ`, `abdomen_circ`); all five are required.
    pub channels: BTreeMap<String, ColumnSource>,
    /// Column whose non-zero cells mark inspiratory starts.
    #[serde(default)]
    pub insp_marker: Option<String>,
}

impl ColumnMapping {
    pub fn validate(&self) -> Result<()> {
        if !self.delimiter.is_ascii() {
            return Err(DatasetError::InvalidSpec("delimiter must be ASCII".into()));
        }
        for key in self.channels.keys() {
            if Channel::parse(key).is_none() {
                return Err(DatasetError::InvalidSpec(format!("unknown channel `{key}`")));
            }
        }
        for c in Channel::ALL {
            if !self.channels.contains_key(c.name()) {
                return Err(DatasetError::InvalidSpec(format!("no source for channel `{}`", c.name())));
            }
        }
        let sources = self.channels.values().chain(self.time.iter());
        for s in sources {
            if !(s.scale.is_finite() && s.offset.is_finite()) || s.scale == 0.0 {
                return Err(DatasetError::InvalidSpec(format!(
                    "column `{}`: scale must be finite and non-zero",
                    s.column
                )));
            }
        }
        Ok(())
    }
}

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

/// Converts one table into a trial. `extra_insp_starts` are merged with any
/// marker column; both must index existing rows.
pub fn convert_table<R: Read>(
    input: R,
    mapping: &ColumnMapping,
    meta: TrialMeta,
    extra_insp_starts: &[usize],
) -> Result<TrialRecord> {
    mapping.validate()?;
    meta.validate()?;
    let mut text = String::new();
    let mut input = input;
    input
        .read_to_string(&mut text)
        .map_err(|e| DatasetError::SchemaViolation(format!("unreadable input: {e}")))?;
    let body: String = text
        .lines()
        .skip(mapping.skip_lines)
        .collect::<Vec<_>>()
        .join("\n");
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(mapping.delimiter as u8)
        .has_headers(true)
        .flexible(true)
        .from_reader(body.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| DatasetError::SchemaViolation(e.to_string()))?
        .iter()
        .map(|h| h.trim().trim_start_matches('\u{feff}').to_string())
        .collect();
    let index_of = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DatasetError::BadHeader {
                expected: name.to_string(),
                found: headers.join(","),
            })
    };

    let time_col = mapping.time.as_ref().map(|s| index_of(&s.column)).transpose()?;
    let mut channel_cols = Vec::with_capacity(Channel::ALL.len());
    for c in Channel::ALL {
        let src = &mapping.channels[c.name()];
        channel_cols.push((index_of(&src.column)?, src.scale, src.offset));
    }
    let marker_col = mapping.insp_marker.as_deref().map(index_of).transpose()?;

    let fs = meta.nominal_fs;
    let mut time = Vec::new();
    let mut channels: Vec<Vec<f64>> = vec![Vec::new(); Channel::ALL.len()];
    let mut insp = Vec::new();
    for (row, result) in reader.records().enumerate() {
        let record = result.map_err(|e| DatasetError::SchemaViolation(e.to_string()))?;
        let cell = |col: usize| record.get(col).ok_or(DatasetError::RaggedRow(row));
        time.push(match (time_col, &mapping.time) {
            (Some(col), Some(src)) => parse_cell(cell(col)?, row)? * src.scale + src.offset,
            _ => row as f64 / fs,
        });
        for (values, &(col, scale, offset)) in channels.iter_mut().zip(&channel_cols) {
            values.push(parse_cell(cell(col)?, row)? * scale + offset);
        }
        if let Some(col) = marker_col {
            let v = parse_cell(cell(col)?, row)?;
            if v.is_finite() && v != 0.0 {
                insp.push(row);
            }
        }
    }

    let n = time.len();
    if n < 2 {
        return Err(DatasetError::TooFewRows(n));
    }
    if let Some(&bad) = extra_insp_starts.iter().find(|&&i| i >= n) {
        return Err(DatasetError::SchemaViolation(format!(
            "insp_starts index {bad} beyond {n} rows"
        )));
    }
    insp.extend_from_slice(extra_insp_starts);
    insp.sort_unstable();
    insp.dedup();
    check_time_axis(&time, fs)?;

    let mut channels = channels.into_iter();
    let mut next = || channels.next().expect("five channels");
    let mut meta = meta;
    meta.duration_s = Some(n as f64 / fs);
    let record = TrialRecord {
        meta,
        time,
        pressure: next(),
        flow: next(),
        tidal_volume: next(),
        chest_circ: next(),
        abdomen_circ: next(),
        insp_starts: insp,
    };
    record.validate()?;
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{BreathingType, Sex, SubjectMeta};

    fn meta() -> TrialMeta {
        TrialMeta {
            subject: SubjectMeta {
                subject_id: "P07".into(),
                sex: Sex::F,
                age: 28,
                height_cm: 165.0,
                weight_kg: 58.0,
                smoker_or_vaper: false,
                asthmatic: true,
            },
            breathing_type: BreathingType::Deep,
            peep_cmh2o: 4.0,
            nominal_fs: 100.0,
            duration_s: None,
        }
    }

    fn mapping(json: &str) -> ColumnMapping {
        serde_json::from_str(json).unwrap()
    }

    const FULL: &str = r#"{
        "delimiter": ";",
        "skip_lines": 1,
        "time": {"column": "t_ms", "scale": 0.001},
        "channels": {
            "pressure": {"column": "P"},
            "flow": {"column": "Q", "scale": 0.001},
            "tidal_volume": {"column": "V"},
            "chest_circ": {"column": "C", "scale": 10.0},
            "abdomen_circ": {"column": "A", "scale": 10.0, "offset": 1.0}
        },
        "insp_marker": "start"
    }"#;

    #[test]
    fn maps_scales_and_marks() {
        let table = "exported by device\nt_ms;P;Q;V;C;A;start\n0;5;100;0.1;90;85;1\n10;5.5;200;0.2;91;86;0\n20;NaN;300;0.3;92;87;0\n";
        let r = convert_table(table.as_bytes(), &mapping(FULL), meta(), &[2]).unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r.time, vec![0.0, 0.01, 0.02]);
        assert_eq!(r.flow, vec![0.1, 0.2, 0.3]);
        assert_eq!(r.chest_circ, vec![900.0, 910.0, 920.0]);
        assert_eq!(r.abdomen_circ[0], 851.0);
        assert!(r.pressure[2].is_nan());
        assert_eq!(r.insp_starts, vec![0, 2]);
        assert_eq!(r.meta.duration_s, Some(0.03));
    }

    #[test]
    fn synthesizes_time_when_unmapped() {
        let m = mapping(
            r#"{"channels": {"pressure": {"column": "p"}, "flow": {"column": "f"},
               "tidal_volume": {"column": "v"}, "chest_circ": {"column": "c"},
               "abdomen_circ": {"column": "a"}}}"#,
        );
        let r = convert_table("p,f,v,c,a\n1,2,3,4,5\n1,2,3,4,5\n".as_bytes(), &m, meta(), &[]).unwrap();
        assert_eq!(r.time, vec![0.0, 0.01]);
        assert!(r.insp_starts.is_empty());
    }

    #[test]
    fn missing_source_column_is_a_header_error() {
        let table = "junk\nt_ms;P;Q;V;C;start\n0;1;1;1;1;0\n10;1;1;1;1;0\n";
        assert!(matches!(
            convert_table(table.as_bytes(), &mapping(FULL), meta(), &[]),
            Err(DatasetError::BadHeader { .. })
        ));
    }

    #[test]
    fn incomplete_mapping_rejected() {
        let m = mapping(r#"{"channels": {"pressure": {"column": "p"}}}"#);
        assert!(matches!(m.validate(), Err(DatasetError::InvalidSpec(_))));
        let m = mapping(
            r#"{"channels": {"pressure": {"column": "p"}, "flow": {"column": "f"},
               "tidal_volume": {"column": "v"}, "chest_circ": {"column": "c"},
               "abdomen_circ": {"column": "a"}, "spo2": {"column": "s"}}}"#,
        );
        assert!(matches!(m.validate(), Err(DatasetError::InvalidSpec(_))));
    }

    #[test]
    fn marker_index_beyond_rows_rejected() {
        let table = "junk\nt_ms;P;Q;V;C;A;start\n0;1;1;1;1;1;0\n10;1;1;1;1;1;0\n";
        assert!(convert_table(table.as_bytes(), &mapping(FULL), meta(), &[5]).is_err());
    }
}
