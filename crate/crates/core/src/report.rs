//! Flat result records shared by every experiment, written as CSV or JSON.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One measured quantity. `threshold` is absent for values that are only
/// reported; such records always pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub suite: String,
    pub geometry: String,
    pub h: f64,
    #[serde(rename = "box")]
    pub box_half_width: f64,
    pub quantity: String,
    pub value: f64,
    pub threshold: Option<f64>,
    pub pass: bool,
}

pub const CSV_HEADER: [&str; 8] = ["suite", "geometry", "h", "box", "quantity", "value", "threshold", "pass"];

/// Shared fields of the records of one run.
#[derive(Debug, Clone)]
pub struct Scope {
    pub suite: String,
    pub geometry: String,
    pub h: f64,
    pub box_half_width: f64,
}

impl Scope {
    pub fn new(suite: &str, geometry: &str, h: f64, box_half_width: f64) -> Self {
        Scope { suite: suite.into(), geometry: geometry.into(), h, box_half_width }
    }

    fn record(&self, quantity: &str, value: f64, threshold: Option<f64>, pass: bool) -> Record {
        Record {
            suite: self.suite.clone(),
            geometry: self.geometry.clone(),
            h: self.h,
            box_half_width: self.box_half_width,
            quantity: quantity.into(),
            value,
            threshold,
            pass,
        }
    }

    /// Passes iff `value <= threshold` (NaN fails).
    pub fn at_most(&self, quantity: &str, value: f64, threshold: f64) -> Record {
        self.record(quantity, value, Some(threshold), value <= threshold)
    }

    /// Passes iff `value >= threshold` (NaN fails).
    pub fn at_least(&self, quantity: &str, value: f64, threshold: f64) -> Record {
        self.record(quantity, value, Some(threshold), value >= threshold)
    }

    /// Passes iff `value < threshold`.
    pub fn below(&self, quantity: &str, value: f64, threshold: f64) -> Record {
        self.record(quantity, value, Some(threshold), value < threshold)
    }

    /// Passes iff `value > threshold`.
    pub fn above(&self, quantity: &str, value: f64, threshold: f64) -> Record {
        self.record(quantity, value, Some(threshold), value > threshold)
    }

    pub fn info(&self, quantity: &str, value: f64) -> Record {
        self.record(quantity, value, None, true)
    }

    /// A failed step, e.g. an operator build that returned an error.
    pub fn failure(&self, quantity: &str) -> Record {
        self.record(quantity, f64::NAN, None, false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

pub fn emit_report(records: &[Record], format: ReportFormat, path: &Path) -> Result<()> {
    match format {
        ReportFormat::Csv => write_csv(records, path),
        ReportFormat::Json => write_json(records, path),
    }
}

pub fn write_csv(records: &[Record], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<Record>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header != CSV_HEADER {
        return Err(Error::Parse { path: path.to_path_buf(), line: 1, message: format!("unexpected header {header:?}") });
    }
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// JSON array of records. Non-finite values are written as `null`.
pub fn write_json(records: &[Record], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, records)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json(path: &Path) -> Result<Vec<Record>> {
    let r: Vec<JsonRecord> = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    Ok(r.into_iter().map(Into::into).collect())
}

// serde_json writes NaN as null; read it back as NaN
#[derive(Deserialize)]
struct JsonRecord {
    suite: String,
    geometry: String,
    h: f64,
    #[serde(rename = "box")]
    box_half_width: f64,
    quantity: String,
    value: Option<f64>,
    threshold: Option<f64>,
    pass: bool,
}

impl From<JsonRecord> for Record {
    fn from(r: JsonRecord) -> Self {
        Record {
            suite: r.suite,
            geometry: r.geometry,
            h: r.h,
            box_half_width: r.box_half_width,
            quantity: r.quantity,
            value: r.value.unwrap_or(f64::NAN),
            threshold: r.threshold,
            pass: r.pass,
        }
    }
}
