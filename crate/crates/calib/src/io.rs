//! Prediction logs: one sample per row, a probability vector and a label.
//!
//! JSONL rows look like `{"probs": [0.7, 0.3], "label": 0}`. CSV files carry
//! a `p0,...,p{K-1},label` header. Probability vectors whose sum is within
//! 1e-3 of one are renormalized on load; anything further off is rejected.
//! Predicted class and confidence are always recomputed from the vector.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use calib_core::PredictionRecord;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictionFormat {
    Jsonl,
    Csv,
}

impl PredictionFormat {
    /// Guesses the format from a file extension, defaulting to JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => PredictionFormat::Csv,
            _ => PredictionFormat::Jsonl,
        }
    }
}

impl FromStr for PredictionFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(PredictionFormat::Jsonl),
            "csv" => Ok(PredictionFormat::Csv),
            other => Err(format!(
                "unknown prediction format `{other}` (expected jsonl or csv)"
            )),
        }
    }
}

impl fmt::Display for PredictionFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PredictionFormat::Jsonl => "jsonl",
            PredictionFormat::Csv => "csv",
        })
    }
}

#[derive(Deserialize)]
struct JsonRow {
    probs: Vec<f64>,
    label: i64,
}

#[derive(Serialize)]
struct JsonRowRef<'a> {
    probs: &'a [f64],
    label: usize,
}

/// Validates one parsed row and turns it into a record.
fn to_record(
    line: u64,
    probs: Vec<f64>,
    label: i64,
    classes: &mut Option<usize>,
) -> Result<PredictionRecord> {
    let malformed = |reason: String| Error::MalformedRow { line, reason };
    if probs.len() < 2 {
        return Err(malformed(format!(
            "need at least 2 probabilities, got {}",
            probs.len()
        )));
    }
    match *classes {
        Some(k) if k != probs.len() => {
            return Err(malformed(format!(
                "expected {k} probabilities, got {}",
                probs.len()
            )))
        }
        _ => *classes = Some(probs.len()),
    }
    if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(malformed(format!(
            "probability {p} is negative or not finite"
        )));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::ProbabilitySum { line, sum });
    }
    if label < 0 || label as usize >= probs.len() {
        return Err(Error::LabelOutOfRange {
            line,
            label,
            classes: probs.len(),
        });
    }
    let probs = probs.into_iter().map(|p| p / sum).collect();
    Ok(PredictionRecord::new(probs, label as usize)?)
}

fn parse_jsonl(reader: impl BufRead) -> Result<Vec<PredictionRecord>> {
    let mut records = Vec::new();
    let mut classes = None;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line.map_err(|e| Error::MalformedRow {
            line: line_no,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let row: JsonRow = serde_json::from_str(&line).map_err(|e| Error::MalformedRow {
            line: line_no,
            reason: e.to_string(),
        })?;
        records.push(to_record(line_no, row.probs, row.label, &mut classes)?);
    }
    Ok(records)
}

fn parse_csv(reader: impl BufRead) -> Result<Vec<PredictionRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header_err = |reason: String| Error::MalformedRow { line: 1, reason };
    let headers = rdr
        .headers()
        .map_err(|e| header_err(e.to_string()))?
        .clone();
    let k = headers.len().saturating_sub(1);
    let expected: Vec<String> = (0..k)
        .map(|j| format!("p{j}"))
        .chain(["label".into()])
        .collect();
    if k < 2 || headers.iter().ne(expected.iter().map(String::as_str)) {
        return Err(header_err(format!(
            "header must be p0,...,p{{K-1}},label with K >= 2, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut records = Vec::new();
    let mut classes = Some(k);
    for row in rdr.records() {
        let row = row.map_err(|e| Error::MalformedRow {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let malformed = |reason: String| Error::MalformedRow { line, reason };
        let probs = row
            .iter()
            .take(k)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|e| malformed(format!("`{v}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let label = row[k]
            .parse::<i64>()
            .map_err(|e| malformed(format!("label `{}`: {e}", &row[k])))?;
        records.push(to_record(line, probs, label, &mut classes)?);
    }
    Ok(records)
}

/// Parses a prediction log from any reader.
pub fn parse_predictions(
    reader: impl BufRead,
    format: PredictionFormat,
) -> Result<Vec<PredictionRecord>> {
    match format {
        PredictionFormat::Jsonl => parse_jsonl(reader),
        PredictionFormat::Csv => parse_csv(reader),
    }
}

pub fn load_predictions(
    path: impl AsRef<Path>,
    format: PredictionFormat,
) -> Result<Vec<PredictionRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_predictions(BufReader::new(file), format)
}

/// Writes records in the format [`parse_predictions`] reads. Floats use the
/// shortest representation that round-trips exactly.
pub fn write_predictions(
    records: &[PredictionRecord],
    mut out: impl Write,
    format: PredictionFormat,
) -> std::io::Result<()> {
    match format {
        PredictionFormat::Jsonl => {
            for r in records {
                let row = JsonRowRef {
                    probs: r.probs(),
                    label: r.true_class(),
                };
                serde_json::to_writer(&mut out, &row)?;
                out.write_all(b"\n")?;
            }
        }
        PredictionFormat::Csv => {
            let k = records.first().map_or(0, PredictionRecord::num_classes);
            let header: Vec<String> = (0..k)
                .map(|j| format!("p{j}"))
                .chain(["label".into()])
                .collect();
            writeln!(out, "{}", header.join(","))?;
            for r in records {
                for p in r.probs() {
                    write!(out, "{p:?},")?;
                }
                writeln!(out, "{}", r.true_class())?;
            }
        }
    }
    out.flush()
}

/// Saves records to `path`. An empty record list is an error and creates
/// no file.
pub fn save_predictions(
    records: &[PredictionRecord],
    path: impl AsRef<Path>,
    format: PredictionFormat,
) -> Result<()> {
    let path = path.as_ref();
    if records.is_empty() {
        return Err(Error::Empty("save: no prediction records"));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_predictions(records, BufWriter::new(file), format).map_err(|e| Error::io(path, e))
}
