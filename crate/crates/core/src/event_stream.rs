//! Timestamped prediction logs: parsing, validation, chronological splits and
//! thresholding.
//!
//! Records are kept in nondecreasing timestamp order. Records that share a
//! timestamp keep their input order everywhere (parsing, splitting and
//! disagreement enumeration).

use std::io::{BufRead, BufReader, Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default decision threshold for turning scores into labels.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// One timestamped test event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub t: f64,
    pub y: u8,
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
}

impl PredictionRecord {
    pub fn new(t: f64, y: u8, p: f64) -> Self {
        Self { t, y, p, id: None }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if !self.t.is_finite() || self.t < 0.0 {
            return Err(format!("timestamp {} must be finite and non-negative", self.t));
        }
        if self.y > 1 {
            return Err(format!("label {} is not 0 or 1", self.y));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(format!("score {} outside [0, 1]", self.p));
        }
        Ok(())
    }
}

/// Chronologically ordered, non-empty sequence of prediction records.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalStream {
    records: Vec<PredictionRecord>,
    t_start: f64,
    t_end: f64,
}

impl EvalStream {
    /// Validates and wraps records that are already in chronological order.
    pub fn new(records: Vec<PredictionRecord>) -> Result<Self> {
        Self::build(records, false)
    }

    /// Like [`EvalStream::new`] but stably sorts by timestamp first.
    pub fn from_unsorted(records: Vec<PredictionRecord>) -> Result<Self> {
        Self::build(records, true)
    }

    fn build(mut records: Vec<PredictionRecord>, sort: bool) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyInput);
        }
        for (i, r) in records.iter().enumerate() {
            r.validate()
                .map_err(|reason| Error::MalformedRecord { line: i + 1, reason })?;
        }
        if sort {
            records.sort_by(|a, b| a.t.total_cmp(&b.t));
        } else if let Some(i) = records.windows(2).position(|w| w[1].t < w[0].t) {
            return Err(Error::UnsortedInput {
                line: i + 2,
                prev: records[i].t,
                current: records[i + 1].t,
            });
        }
        let t_start = records[0].t;
        let t_end = records[records.len() - 1].t;
        Ok(Self { records, t_start, t_end })
    }

    pub fn records(&self) -> &[PredictionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    /// Test period `(t_start, t_end)`.
    pub fn period(&self) -> (f64, f64) {
        (self.t_start, self.t_end)
    }

    pub fn labels(&self) -> Vec<u8> {
        self.records.iter().map(|r| r.y).collect()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.p).collect()
    }

    pub fn timestamps(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn into_records(self) -> Vec<PredictionRecord> {
        self.records
    }
}

/// On-disk record format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Jsonl,
    Csv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(Format::Jsonl),
            "csv" => Ok(Format::Csv),
            other => Err(Error::InvalidConfig(format!("unknown format `{other}`"))),
        }
    }
}

#[derive(Deserialize)]
struct JsonRecord {
    t: f64,
    y: f64,
    p: f64,
    #[serde(default)]
    id: Option<String>,
}

fn label_from_f64(y: f64) -> std::result::Result<u8, String> {
    if y == 0.0 {
        Ok(0)
    } else if y == 1.0 {
        Ok(1)
    } else {
        Err(format!("label {y} is not 0 or 1"))
    }
}

/// Parses a JSONL or CSV log into a validated stream.
///
/// With `sort` unset, a decreasing timestamp is an error; with it set, records
/// are stably sorted by timestamp.
pub fn parse_records<R: Read>(input: R, format: Format, sort: bool) -> Result<EvalStream> {
    let records = match format {
        Format::Jsonl => parse_jsonl(input)?,
        Format::Csv => parse_csv(input)?,
    };
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !sort {
        // report the offending source line rather than the record index
        if let Some(i) = records.windows(2).position(|w| w[1].1.t < w[0].1.t) {
            return Err(Error::UnsortedInput {
                line: records[i + 1].0,
                prev: records[i].1.t,
                current: records[i + 1].1.t,
            });
        }
    }
    EvalStream::build(records.into_iter().map(|(_, r)| r).collect(), sort)
}

fn parse_jsonl<R: Read>(input: R) -> Result<Vec<(usize, PredictionRecord)>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: JsonRecord = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            line: line_no,
            reason: e.to_string(),
        })?;
        let y = label_from_f64(raw.y).map_err(|reason| Error::MalformedRecord { line: line_no, reason })?;
        let rec = PredictionRecord { t: raw.t, y, p: raw.p, id: raw.id };
        rec.validate()
            .map_err(|reason| Error::MalformedRecord { line: line_no, reason })?;
        out.push((line_no, rec));
    }
    Ok(out)
}

fn parse_csv<R: Read>(input: R) -> Result<Vec<(usize, PredictionRecord)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(input);
    let header = reader
        .headers()
        .map_err(|e| Error::MalformedRecord { line: 1, reason: e.to_string() })?
        .clone();
    let fields: Vec<&str> = header.iter().collect();
    let has_id = match fields.as_slice() {
        ["t", "y", "p"] => false,
        ["t", "y", "p", "id"] => true,
        [] => return Err(Error::EmptyInput),
        _ => {
            return Err(Error::MalformedRecord {
                line: 1,
                reason: format!("header must be `t,y,p` or `t,y,p,id`, found `{}`", fields.join(",")),
            })
        }
    };
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::MalformedRecord { line, reason: e.to_string() }
        })?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let bad = |reason: String| Error::MalformedRecord { line, reason };
        let num = |idx: usize, name: &str| -> Result<f64> {
            row[idx]
                .trim()
                .parse::<f64>()
                .map_err(|_| bad(format!("field `{name}` is not a number: `{}`", &row[idx])))
        };
        let t = num(0, "t")?;
        let y = match row[1].trim() {
            "0" => 0,
            "1" => 1,
            other => return Err(bad(format!("label `{other}` is not 0 or 1"))),
        };
        let p = num(2, "p")?;
        let id = if has_id && !row[3].is_empty() { Some(row[3].to_string()) } else { None };
        let rec = PredictionRecord { t, y, p, id };
        rec.validate().map_err(bad)?;
        out.push((line, rec));
    }
    Ok(out)
}

/// Writes records in the given format; output parses back to the same records.
pub fn write_records<W: Write>(records: &[PredictionRecord], format: Format, out: W) -> Result<()> {
    match format {
        Format::Jsonl => write_jsonl(records, out),
        Format::Csv => write_csv(records, out),
    }
}

fn write_jsonl<W: Write>(records: &[PredictionRecord], mut out: W) -> Result<()> {
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::Io(e.to_string()))?;
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

fn write_csv<W: Write>(records: &[PredictionRecord], out: W) -> Result<()> {
    let has_id = records.iter().any(|r| r.id.is_some());
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    if has_id {
        w.write_record(["t", "y", "p", "id"]).map_err(io)?;
    } else {
        w.write_record(["t", "y", "p"]).map_err(io)?;
    }
    for r in records {
        let t = r.t.to_string();
        let y = r.y.to_string();
        let p = r.p.to_string();
        if has_id {
            w.write_record([t.as_str(), y.as_str(), p.as_str(), r.id.as_deref().unwrap_or("")])
                .map_err(io)?;
        } else {
            w.write_record([t.as_str(), y.as_str(), p.as_str()]).map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Splits a stream by position at `floor(r_train*M)` and
/// `floor((r_train+r_val)*M)`.
pub fn chronological_split(
    stream: &EvalStream,
    ratios: (f64, f64, f64),
) -> Result<(EvalStream, EvalStream, EvalStream)> {
    let (a, b, c) = ratios;
    let valid = [a, b, c].iter().all(|r| r.is_finite() && *r > 0.0);
    if !valid || (a + b + c - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidRatios(ratios));
    }
    let m = stream.len();
    let first = (a * m as f64).floor() as usize;
    let second = ((a + b) * m as f64).floor() as usize;
    if first == 0 || second <= first || second >= m {
        return Err(Error::DegenerateSplit(ratios));
    }
    let recs = stream.records();
    Ok((
        EvalStream::new(recs[..first].to_vec())?,
        EvalStream::new(recs[first..second].to_vec())?,
        EvalStream::new(recs[second..].to_vec())?,
    ))
}

fn check_threshold(threshold: f64) -> Result<()> {
    if threshold > 0.0 && threshold < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("threshold {threshold} must lie in (0, 1)")))
    }
}

/// Predicted labels: 1 iff `p >= threshold`.
pub fn threshold_labels(stream: &EvalStream, threshold: f64) -> Result<Vec<u8>> {
    check_threshold(threshold)?;
    Ok(stream.records().iter().map(|r| u8::from(r.p >= threshold)).collect())
}

/// A disagreement event: position in the source stream, optional id, timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct DisagreementEntry {
    pub index: usize,
    pub id: Option<String>,
    pub t: f64,
}

impl DisagreementEntry {
    /// Identifier as reported: the record id, or its stream index.
    pub fn label(&self) -> String {
        self.id.clone().unwrap_or_else(|| self.index.to_string())
    }
}

/// Events whose thresholded prediction differs from the ground truth, in
/// chronological order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DisagreementSet {
    entries: Vec<DisagreementEntry>,
}

impl DisagreementSet {
    /// Builds a set from arbitrary entries; they are stably sorted by time.
    pub fn from_entries(mut entries: Vec<DisagreementEntry>) -> Self {
        entries.sort_by(|a, b| a.t.total_cmp(&b.t));
        Self { entries }
    }

    /// Set with anonymous entries at the given times.
    pub fn from_times(times: &[f64]) -> Self {
        Self::from_entries(
            times
                .iter()
                .enumerate()
                .map(|(index, &t)| DisagreementEntry { index, id: None, t })
                .collect(),
        )
    }

    pub fn entries(&self) -> &[DisagreementEntry] {
        &self.entries
    }

    /// Cardinality K.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.t).collect()
    }

    /// Position of the entry built from stream record `index`.
    pub fn position_of(&self, index: usize) -> Option<usize> {
        self.entries.iter().position(|e| e.index == index)
    }
}

/// Records whose thresholded label differs from the ground truth.
pub fn disagreement_set(stream: &EvalStream, threshold: f64) -> Result<DisagreementSet> {
    let predicted = threshold_labels(stream, threshold)?;
    let entries = stream
        .records()
        .iter()
        .zip(predicted)
        .enumerate()
        .filter(|(_, (r, yhat))| r.y != *yhat)
        .map(|(index, (r, _))| DisagreementEntry { index, id: r.id.clone(), t: r.t })
        .collect();
    // stream order is already chronological
    Ok(DisagreementSet { entries })
}
