//! CSV dataset ingestion and JSON model persistence.
//!
//! Datasets are headerless, comma-separated rows of `n` numeric features
//! followed by one label. Models are versioned, pretty-printed JSON; floats
//! are written in shortest round-trip form and parsed exactly, so a saved
//! model reloads bit-for-bit.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{DmrError, Result};
use crate::model::{DmrModel, FORMAT_VERSION};
use crate::vectors::FeatureVector;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Vec<FeatureVector>,
    pub labels: Vec<String>,
    /// Row index in the source file.
    pub source_ids: Vec<usize>,
}

impl Dataset {
    pub fn new(samples: Vec<FeatureVector>, labels: Vec<String>) -> Result<Self> {
        if samples.len() != labels.len() {
            return Err(DmrError::LengthMismatch {
                left: samples.len(),
                right: labels.len(),
            });
        }
        if let Some(first) = samples.first() {
            for x in &samples {
                x.check_dim(first.dim())?;
            }
        }
        let source_ids = (0..samples.len()).collect();
        Ok(Dataset {
            samples,
            labels,
            source_ids,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, |x| x.dim())
    }

    /// Rows at `indices`, keeping their original source ids.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
            source_ids: indices.iter().map(|&i| self.source_ids[i]).collect(),
        }
    }
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn parse_features(record: &csv::StringRecord, row: usize, n: usize) -> Result<FeatureVector> {
    let values = (0..n)
        .map(|column| {
            let field = &record[column];
            field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| DmrError::Parse {
                    row,
                    column,
                    value: field.to_owned(),
                })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(FeatureVector::from_raw(values))
}

/// Reads a labeled dataset: every row is features then a label.
pub fn read_dataset<R: Read>(input: R) -> Result<Dataset> {
    let mut rdr = reader(input);
    let mut expected = None;
    let mut ds = Dataset::default();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let width = *expected.get_or_insert(record.len());
        if record.len() != width {
            return Err(DmrError::Ragged {
                row,
                expected: width,
                found: record.len(),
            });
        }
        if width < 2 {
            return Err(DmrError::Ragged {
                row,
                expected: 2,
                found: width,
            });
        }
        ds.samples.push(parse_features(&record, row, width - 1)?);
        ds.labels.push(record[width - 1].to_owned());
        ds.source_ids.push(row);
    }
    Ok(ds)
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let ds = read_dataset(BufReader::new(File::open(path)?))?;
    if ds.is_empty() {
        return Err(DmrError::EmptyFile(path.to_owned()));
    }
    Ok(ds)
}

/// Query rows for a model of dimensionality `dim`: either exactly `dim`
/// features, or features followed by a label which is returned alongside.
pub fn read_queries<R: Read>(input: R, dim: usize) -> Result<Vec<(FeatureVector, Option<String>)>> {
    let mut rdr = reader(input);
    let mut out = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let label = match record.len() {
            n if n == dim => None,
            n if n == dim + 1 => Some(record[dim].to_owned()),
            found => {
                return Err(DmrError::Ragged {
                    row,
                    expected: dim,
                    found,
                })
            }
        };
        out.push((parse_features(&record, row, dim)?, label));
    }
    Ok(out)
}

pub fn load_queries(path: impl AsRef<Path>, dim: usize) -> Result<Vec<(FeatureVector, Option<String>)>> {
    let path = path.as_ref();
    let rows = read_queries(BufReader::new(File::open(path)?), dim)?;
    if rows.is_empty() {
        return Err(DmrError::EmptyFile(path.to_owned()));
    }
    Ok(rows)
}

pub fn model_to_json(model: &DmrModel) -> Result<String> {
    let mut s = serde_json::to_string_pretty(model)?;
    s.push('\n');
    Ok(s)
}

pub fn model_from_json(text: &str) -> Result<DmrModel> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    match value.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) if v == FORMAT_VERSION as u64 => {}
        Some(v) => {
            return Err(DmrError::UnsupportedVersion {
                found: v,
                supported: FORMAT_VERSION,
            })
        }
        None => return Err(DmrError::integrity("format_version", "missing or not an integer")),
    }
    // Parse from text rather than from `value` so floats go through the
    // exact parser.
    let model: DmrModel = serde_json::from_str(text)?;
    model.validate()?;
    Ok(model)
}

/// Writes the model atomically (temporary file in the target directory,
/// then rename).
pub fn save_model(model: &DmrModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let json = model_to_json(model)?;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(json.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| DmrError::Io(e.error))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<DmrModel> {
    let text = std::fs::read_to_string(path)?;
    model_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rows() {
        let ds = read_dataset("1.0,2.0,cat\n3,4,dog\n-1e-3, 5 ,cat\n".as_bytes()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.samples[0].as_slice(), &[1.0, 2.0]);
        assert_eq!(ds.labels[0], "cat");
        assert_eq!(ds.source_ids, vec![0, 1, 2]);
        assert_eq!(ds.samples[2].as_slice(), &[-1e-3, 5.0]);
    }

    #[test]
    fn reports_bad_field_position() {
        let err = read_dataset("1.0,x,cat\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DmrError::Parse { row: 0, column: 1, .. }), "{err}");
        let err = read_dataset("1,2,a\n1,2,3,b\n".as_bytes()).unwrap_err();
        assert!(matches!(
            err,
            DmrError::Ragged {
                row: 1,
                expected: 3,
                found: 4
            }
        ));
        let err = read_dataset("1,nan,a\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DmrError::Parse { column: 1, .. }));
    }

    #[test]
    fn empty_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        std::fs::write(&p, "").unwrap();
        assert!(matches!(load_csv(&p), Err(DmrError::EmptyFile(_))));
    }

    #[test]
    fn queries_accept_optional_label() {
        let rows = read_queries("1,2\n3,4,b\n".as_bytes(), 2).unwrap();
        assert_eq!(rows[0].1, None);
        assert_eq!(rows[1].1.as_deref(), Some("b"));
        assert!(read_queries("1,2,3,4\n".as_bytes(), 2).is_err());
    }

    #[test]
    fn version_bump_is_rejected() {
        let err = model_from_json(r#"{"format_version": 2}"#).unwrap_err();
        assert!(err.to_string().contains("unsupported version"));
    }
}
