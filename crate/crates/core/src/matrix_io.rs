//! Text serialization for dense matrices and small key=value headers, shared
//! by the topic-model persistence formats. Values are written with 17
//! significant digits so f64 round-trips are exact.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MatrixIoError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Format {
        path: String,
        line: usize,
        msg: String,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> MatrixIoError {
    MatrixIoError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// One matrix row per line, entries space-separated in `{:.16e}` form.
pub fn save_matrix(m: &Array2<f64>, path: &Path) -> Result<(), MatrixIoError> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    for row in m.rows() {
        let mut first = true;
        for v in row {
            if !first {
                write!(w, " ").map_err(|e| io_err(path, e))?;
            }
            write!(w, "{v:.16e}").map_err(|e| io_err(path, e))?;
            first = false;
        }
        writeln!(w).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn load_matrix(path: &Path) -> Result<Array2<f64>, MatrixIoError> {
    let reader = BufReader::new(File::open(path).map_err(|e| io_err(path, e))?);
    let mut data = Vec::new();
    let mut n_cols = None;
    let mut n_rows = 0;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        let fmt = |msg: String| MatrixIoError::Format {
            path: path.display().to_string(),
            line: lineno + 1,
            msg,
        };
        let row: Result<Vec<f64>, _> = line
            .split_whitespace()
            .map(|tok| tok.parse::<f64>().map_err(|_| fmt(format!("bad number {tok:?}"))))
            .collect();
        let row = row?;
        match n_cols {
            None => n_cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(fmt(format!("expected {c} columns, got {}", row.len())))
            }
            _ => {}
        }
        n_rows += 1;
        data.extend(row);
    }
    let n_cols = n_cols.unwrap_or(0);
    Array2::from_shape_vec((n_rows, n_cols), data).map_err(|e| MatrixIoError::Format {
        path: path.display().to_string(),
        line: 0,
        msg: e.to_string(),
    })
}

/// `key = value` lines, keys sorted.
pub fn save_header(fields: &BTreeMap<String, String>, path: &Path) -> Result<(), MatrixIoError> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    for (k, v) in fields {
        writeln!(w, "{k} = {v}").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn load_header(path: &Path) -> Result<BTreeMap<String, String>, MatrixIoError> {
    let reader = BufReader::new(File::open(path).map_err(|e| io_err(path, e))?);
    let mut fields = BTreeMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| MatrixIoError::Format {
            path: path.display().to_string(),
            line: lineno + 1,
            msg: "expected key = value".into(),
        })?;
        fields.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(fields)
}

/// Fetch + parse one header field.
pub fn header_field<T: std::str::FromStr>(
    fields: &BTreeMap<String, String>,
    key: &str,
    path: &Path,
) -> Result<T, MatrixIoError> {
    fields
        .get(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| MatrixIoError::Format {
            path: path.display().to_string(),
            line: 0,
            msg: format!("missing or unparseable header field {key:?}"),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn matrix_round_trips_bit_exactly() {
        let m = array![
            [1.0, std::f64::consts::PI, 1e-300],
            [-2.5e17, 0.1 + 0.2, f64::MIN_POSITIVE]
        ];
        let tmp = tempfile::NamedTempFile::new().unwrap();
        save_matrix(&m, tmp.path()).unwrap();
        let loaded = load_matrix(tmp.path()).unwrap();
        assert_eq!(m, loaded);
    }

    #[test]
    fn header_round_trips() {
        let tmp = tempfile::NamedTempFile::new().unwrap();
        let mut fields = BTreeMap::new();
        fields.insert("t".to_string(), "5".to_string());
        fields.insert("seed".to_string(), "42".to_string());
        save_header(&fields, tmp.path()).unwrap();
        let loaded = load_header(tmp.path()).unwrap();
        assert_eq!(loaded, fields);
        let t: usize = header_field(&loaded, "t", tmp.path()).unwrap();
        assert_eq!(t, 5);
        assert!(header_field::<usize>(&loaded, "missing", tmp.path()).is_err());
    }

    #[test]
    fn ragged_matrix_rejected() {
        let tmp = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(tmp.path(), "1 2\n3\n").unwrap();
        assert!(load_matrix(tmp.path()).is_err());
    }
}
