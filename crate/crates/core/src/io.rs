//! CSV readers and writers for observations, probability matrices, class
//! weights and feature tables.
//!
//! Floats are written with Rust's shortest round-trip formatting, so the
//! same values always produce the same bytes.

use std::fs;
use std::path::Path;

use crate::domain::{validate_dataset, validate_dataset_with, ClassVocabulary, Dataset, ProbVector, RawRow};
use crate::error::{Error, Result};
use crate::fusion::ProbMatrix;

/// Shortest round-trip text, switching to exponent form outside
/// `[1e-5, 1e16)` so near-zero probabilities stay short.
pub fn format_float(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) || !a.is_finite() {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

/// Attach a path to an I/O error.
pub fn with_path(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

/// Read a UTF-8 file; errors name the path.
pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| with_path(path, e))
}

/// Write a UTF-8 file; errors name the path.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| with_path(path, e))
}

pub const OBSERVATION_HEADER: [&str; 7] =
    ["obs_id", "latitude", "longitude", "date", "label_l1", "label_l2", "label_l3"];

fn check_header(found: &csv::StringRecord, expected: &[&str], what: &str) -> Result<()> {
    if found.iter().ne(expected.iter().copied()) {
        return Err(Error::HeaderMismatch(format!(
            "{what}: expected columns {}, found {}",
            expected.join(","),
            found.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

pub fn parse_raw_rows(text: &str) -> Result<Vec<RawRow>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    check_header(rdr.headers()?, &OBSERVATION_HEADER, "observation file")?;
    let mut rows = Vec::new();
    for rec in rdr.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}

pub fn parse_observations(text: &str) -> Result<Dataset> {
    validate_dataset(&parse_raw_rows(text)?)
}

/// Parse against a fixed vocabulary; species outside it are violations.
pub fn parse_observations_with(text: &str, vocabulary: &ClassVocabulary) -> Result<Dataset> {
    validate_dataset_with(&parse_raw_rows(text)?, vocabulary)
}

pub fn read_observations(path: impl AsRef<Path>) -> Result<Dataset> {
    parse_observations(&read_text(path.as_ref())?)
}

pub fn read_observations_with(path: impl AsRef<Path>, vocabulary: &ClassVocabulary) -> Result<Dataset> {
    parse_observations_with(&read_text(path.as_ref())?, vocabulary)
}

pub fn observations_to_csv(dataset: &Dataset) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(OBSERVATION_HEADER)?;
    for row in dataset.to_rows() {
        w.write_record([
            row.obs_id,
            row.latitude.to_string(),
            row.longitude.to_string(),
            row.date,
            row.label_l1,
            row.label_l2,
            row.label_l3,
        ])?;
    }
    finish(w)
}

pub fn write_observations(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &observations_to_csv(dataset)?)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

fn parse_float(field: &str, line: u64, column: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("line {line}, column {column}: {field:?} is not a number")))
}

/// Header `obs_id,<label>,...`; the header fixes the vocabulary order.
pub fn parse_prob_matrix(text: &str) -> Result<ProbMatrix> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("obs_id") || header.len() < 2 {
        return Err(Error::HeaderMismatch("probability file must start with obs_id followed by class labels".into()));
    }
    let labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut matrix = ProbMatrix::new(ClassVocabulary::from_ordered(labels.clone())?);
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let id = rec.get(0).unwrap_or_default().to_string();
        let values =
            rec.iter().skip(1).zip(&labels).map(|(f, l)| parse_float(f, line, l)).collect::<Result<Vec<f64>>>()?;
        let row = ProbVector::from_ingest(values)
            .map_err(|e| Error::InvalidProbability(format!("line {line}, obs_id {id:?}: {e}")))?;
        matrix.push(id, row)?;
    }
    Ok(matrix)
}

pub fn read_prob_matrix(path: impl AsRef<Path>) -> Result<ProbMatrix> {
    parse_prob_matrix(&read_text(path.as_ref())?)
}

pub fn prob_matrix_to_csv(matrix: &ProbMatrix) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["obs_id".to_string()];
    header.extend(matrix.vocabulary().labels().iter().cloned());
    w.write_record(&header)?;
    for (id, row) in matrix.iter() {
        let mut rec = vec![id.to_string()];
        rec.extend(row.as_slice().iter().copied().map(format_float));
        w.write_record(&rec)?;
    }
    finish(w)
}

pub fn write_prob_matrix(matrix: &ProbMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &prob_matrix_to_csv(matrix)?)
}

/// `class,index,weight`, one row per vocabulary entry.
pub fn class_weights_to_csv(weights: &[f64], vocabulary: &ClassVocabulary) -> Result<String> {
    if weights.len() != vocabulary.len() {
        return Err(Error::LengthMismatch { left: vocabulary.len(), right: weights.len() });
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["class", "index", "weight"])?;
    for (i, weight) in weights.iter().enumerate() {
        w.write_record([vocabulary.label(i).to_string(), i.to_string(), format_float(*weight)])?;
    }
    finish(w)
}

/// Reads a weight file back in vocabulary order.
pub fn parse_class_weights(text: &str, vocabulary: &ClassVocabulary) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    check_header(rdr.headers()?, &["class", "index", "weight"], "class weight file")?;
    let mut out: Vec<Option<f64>> = vec![None; vocabulary.len()];
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let label = rec.get(0).unwrap_or_default();
        let i = vocabulary
            .index_of(label)
            .ok_or_else(|| Error::VocabularyMismatch(format!("weight file class {label:?} not in vocabulary")))?;
        out[i] = Some(parse_float(rec.get(2).unwrap_or_default(), line, "weight")?);
    }
    out.iter()
        .enumerate()
        .map(|(i, w)| {
            w.ok_or_else(|| Error::VocabularyMismatch(format!("weight file lacks class {:?}", vocabulary.label(i))))
        })
        .collect()
}

/// `obs_id,label,x0..x{d-1}` for resampled feature rows.
pub fn features_to_csv(
    ids: &[String],
    labels: &[usize],
    features: &[Vec<f64>],
    vocabulary: &ClassVocabulary,
) -> Result<String> {
    if ids.len() != labels.len() || ids.len() != features.len() {
        return Err(Error::LengthMismatch { left: ids.len(), right: features.len() });
    }
    let dim = features.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["obs_id".to_string(), "label".to_string()];
    header.extend((0..dim).map(|i| format!("x{i}")));
    w.write_record(&header)?;
    for ((id, &y), f) in ids.iter().zip(labels).zip(features) {
        let mut rec = vec![id.clone(), vocabulary.label(y).to_string()];
        rec.extend(f.iter().copied().map(format_float));
        w.write_record(&rec)?;
    }
    finish(w)
}
