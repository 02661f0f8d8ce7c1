//! Incident record I/O: load and validate CSV/JSONL incident files, quarantine
//! malformed rows as diagnostics, project coordinates to local meters, and
//! tally label frequencies.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius in meters, used by the equirectangular projection.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

const REQUIRED_COLUMNS: [&str; 5] = ["id", "narrative", "call_type", "lat", "lon"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("missing required columns: {}", missing.join(", "))]
    MissingColumns { missing: Vec<String> },
    #[error("zero valid rows ({rejected} rejected)")]
    ZeroValidRows { rejected: usize },
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One raw incident row: narrative text, manually assigned call type, and a
/// WGS84 location. The timestamp is carried but unused.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidentRecord {
    pub id: String,
    pub narrative: String,
    pub call_type: String,
    pub lat: f64,
    pub lon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

/// Why a row was quarantined instead of loaded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowDiagnostic {
    /// 1-based data row number (header excluded for CSV).
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Csv,
    Jsonl,
}

impl FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(InputFormat::Csv),
            "jsonl" => Ok(InputFormat::Jsonl),
            other => Err(format!("unknown format {other:?} (expected csv or jsonl)")),
        }
    }
}

impl fmt::Display for InputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InputFormat::Csv => "csv",
            InputFormat::Jsonl => "jsonl",
        })
    }
}

/// Field-level validation shared by both formats. Returns the first problem.
fn validate(record: &IncidentRecord) -> Option<String> {
    if record.id.is_empty() {
        return Some("empty id".into());
    }
    if record.id.chars().any(char::is_whitespace) {
        // Corpus files are whitespace-delimited; ids must stay atomic there.
        return Some(format!("id {:?} contains whitespace", record.id));
    }
    if !record.lat.is_finite() || !(-90.0..=90.0).contains(&record.lat) {
        return Some(format!("lat out of range: {}", record.lat));
    }
    if !record.lon.is_finite() || !(-180.0..=180.0).contains(&record.lon) {
        return Some(format!("lon out of range: {}", record.lon));
    }
    if let Some(ts) = record.timestamp.as_deref() {
        if chrono::DateTime::parse_from_rfc3339(ts).is_err() {
            return Some(format!("timestamp {ts:?} is not an ISO-8601 instant"));
        }
    }
    None
}

/// Load incident records, quarantining malformed rows as diagnostics. Errors
/// only on an unreadable file, missing required columns, or zero valid rows.
pub fn load_incidents(
    path: &Path,
    format: InputFormat,
) -> Result<(Vec<IncidentRecord>, Vec<RowDiagnostic>), IngestError> {
    let file = File::open(path).map_err(|e| IngestError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let (mut records, mut diagnostics) = match format {
        InputFormat::Csv => load_csv(file)?,
        InputFormat::Jsonl => load_jsonl(file)?,
    };

    // Duplicate ids are quarantined, first occurrence wins.
    let mut seen: HashSet<String> = HashSet::with_capacity(records.len());
    let mut unique = Vec::with_capacity(records.len());
    for (row, record) in records.drain(..) {
        if seen.insert(record.id.clone()) {
            unique.push(record);
        } else {
            diagnostics.push(RowDiagnostic {
                row,
                reason: format!("duplicate id {:?}", record.id),
            });
        }
    }
    diagnostics.sort_by_key(|d| d.row);

    if unique.is_empty() {
        return Err(IngestError::ZeroValidRows {
            rejected: diagnostics.len(),
        });
    }
    Ok((unique, diagnostics))
}

type RawRows = (Vec<(usize, IncidentRecord)>, Vec<RowDiagnostic>);

fn load_csv(file: File) -> Result<RawRows, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(false)
        .from_reader(BufReader::new(file));
    let headers = reader
        .headers()
        .map_err(|e| IngestError::MissingColumns {
            missing: vec![format!("unreadable header: {e}")],
        })?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let missing: Vec<String> = REQUIRED_COLUMNS
        .iter()
        .filter(|c| col(c).is_none())
        .map(|c| c.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(IngestError::MissingColumns { missing });
    }
    let idx: Vec<usize> = REQUIRED_COLUMNS.iter().map(|c| col(c).unwrap()).collect();
    let ts_idx = col("timestamp");

    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let rowno = i + 1;
        let mut reject = |reason: String| {
            diagnostics.push(RowDiagnostic { row: rowno, reason });
        };
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                reject(format!("unparseable row: {e}"));
                continue;
            }
        };
        let field = |i: usize| row.get(i).unwrap_or("");
        let lat = match field(idx[3]).parse::<f64>() {
            Ok(v) => v,
            Err(_) => {
                reject(format!("lat is not a number: {:?}", field(idx[3])));
                continue;
            }
        };
        let lon = match field(idx[4]).parse::<f64>() {
            Ok(v) => v,
            Err(_) => {
                reject(format!("lon is not a number: {:?}", field(idx[4])));
                continue;
            }
        };
        let record = IncidentRecord {
            id: field(idx[0]).to_string(),
            narrative: field(idx[1]).to_string(),
            call_type: field(idx[2]).to_string(),
            lat,
            lon,
            timestamp: ts_idx
                .map(field)
                .filter(|s| !s.is_empty())
                .map(str::to_string),
        };
        match validate(&record) {
            Some(reason) => reject(reason),
            None => records.push((rowno, record)),
        }
    }
    Ok((records, diagnostics))
}

fn load_jsonl(file: File) -> Result<RawRows, IngestError> {
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let rowno = i + 1;
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                diagnostics.push(RowDiagnostic {
                    row: rowno,
                    reason: format!("unreadable line: {e}"),
                });
                continue;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<IncidentRecord>(&line) {
            Ok(record) => match validate(&record) {
                Some(reason) => diagnostics.push(RowDiagnostic { row: rowno, reason }),
                None => records.push((rowno, record)),
            },
            Err(e) => diagnostics.push(RowDiagnostic {
                row: rowno,
                reason: format!("bad json: {e}"),
            }),
        }
    }
    Ok((records, diagnostics))
}

/// Persist records in either on-disk schema.
pub fn save_incidents(
    records: &[IncidentRecord],
    path: &Path,
    format: InputFormat,
) -> Result<(), IngestError> {
    let write_err = |e: std::io::Error| IngestError::Write {
        path: path.display().to_string(),
        source: e,
    };
    let file = File::create(path).map_err(write_err)?;
    match format {
        InputFormat::Csv => {
            let mut w = csv::Writer::from_writer(BufWriter::new(file));
            let io_of = |e: csv::Error| match e.into_kind() {
                csv::ErrorKind::Io(io) => io,
                other => std::io::Error::other(format!("{other:?}")),
            };
            w.write_record(["id", "narrative", "call_type", "lat", "lon", "timestamp"])
                .map_err(|e| write_err(io_of(e)))?;
            for r in records {
                w.write_record([
                    r.id.as_str(),
                    r.narrative.as_str(),
                    r.call_type.as_str(),
                    &r.lat.to_string(),
                    &r.lon.to_string(),
                    r.timestamp.as_deref().unwrap_or(""),
                ])
                .map_err(|e| write_err(io_of(e)))?;
            }
            w.flush().map_err(write_err)
        }
        InputFormat::Jsonl => {
            let mut w = BufWriter::new(file);
            for r in records {
                serde_json::to_writer(&mut w, r).map_err(|e| write_err(e.into()))?;
                writeln!(w).map_err(write_err)?;
            }
            w.flush().map_err(write_err)
        }
    }
}

/// Write quarantined-row diagnostics as JSONL of `{row, reason}`.
pub fn write_diagnostics(diags: &[RowDiagnostic], path: &Path) -> Result<(), IngestError> {
    let write_err = |e: std::io::Error| IngestError::Write {
        path: path.display().to_string(),
        source: e,
    };
    let mut w = BufWriter::new(File::create(path).map_err(write_err)?);
    for d in diags {
        serde_json::to_writer(&mut w, d).map_err(|e| write_err(e.into()))?;
        writeln!(w).map_err(write_err)?;
    }
    w.flush().map_err(write_err)
}

/// Count records per call type, sorted by count descending with ties broken
/// by code ascending.
pub fn label_frequency(records: &[IncidentRecord]) -> Vec<(String, u64)> {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for r in records {
        *counts.entry(&r.call_type).or_insert(0) += 1;
    }
    let mut out: Vec<(String, u64)> = counts
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

/// A point in local meters east/north of the projection origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectedPoint {
    pub x: f64,
    pub y: f64,
}

/// Equirectangular projection anchored at the dataset's bounding-box min
/// corner, with the east-west scale fixed at a declared reference latitude.
/// At city scale (< 50 km) the distance distortion is below 0.1%, so
/// Euclidean distances on the projected plane are physically meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub lat0: f64,
    pub lon0: f64,
    pub ref_lat: f64,
}

impl Projection {
    pub fn new(lat0: f64, lon0: f64, ref_lat: f64) -> Self {
        Projection { lat0, lon0, ref_lat }
    }

    /// Origin at the records' min (lat, lon) corner, reference latitude at
    /// their mean latitude. None when there are no records.
    pub fn from_records(records: &[IncidentRecord]) -> Option<Self> {
        if records.is_empty() {
            return None;
        }
        let lat0 = records.iter().map(|r| r.lat).fold(f64::INFINITY, f64::min);
        let lon0 = records.iter().map(|r| r.lon).fold(f64::INFINITY, f64::min);
        let ref_lat = records.iter().map(|r| r.lat).sum::<f64>() / records.len() as f64;
        Some(Projection { lat0, lon0, ref_lat })
    }

    pub fn project(&self, lat: f64, lon: f64) -> ProjectedPoint {
        ProjectedPoint {
            x: EARTH_RADIUS_M * (lon - self.lon0).to_radians() * self.ref_lat.to_radians().cos(),
            y: EARTH_RADIUS_M * (lat - self.lat0).to_radians(),
        }
    }

    pub fn project_record(&self, record: &IncidentRecord) -> ProjectedPoint {
        self.project(record.lat, record.lon)
    }

    /// Inverse map from local meters back to (lat, lon) degrees.
    pub fn invert(&self, p: ProjectedPoint) -> (f64, f64) {
        let lat = self.lat0 + (p.y / EARTH_RADIUS_M).to_degrees();
        let lon = self.lon0
            + (p.x / (EARTH_RADIUS_M * self.ref_lat.to_radians().cos())).to_degrees();
        (lat, lon)
    }
}
