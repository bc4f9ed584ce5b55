//! Persistence: the binary float format, dense matrices as CSV, JSON configs.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SPRSREC1";

/// `MAGIC`, little-endian `u64` length, then the values as little-endian `f64`.
pub fn write_floats<W: Write>(mut w: W, values: &[f64]) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(values.len() as u64).to_le_bytes())?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_floats<R: Read>(mut r: R) -> Result<Vec<f64>> {
    let mut head = [0u8; 16];
    r.read_exact(&mut head).map_err(|_| Error::Format("file shorter than the 16-byte header".into()))?;
    if &head[..8] != MAGIC {
        return Err(Error::Format("bad magic, expected SPRSREC1".into()));
    }
    let len = u64::from_le_bytes(head[8..].try_into().expect("8 bytes"));
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() as u64 != len.saturating_mul(8) {
        return Err(Error::Format(format!("header says {len} values, body holds {} bytes", body.len())));
    }
    Ok(body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

pub fn save_floats(path: &Path, values: &[f64]) -> Result<()> {
    write_floats(std::io::BufWriter::new(std::fs::File::create(path)?), values)
}

pub fn load_floats(path: &Path) -> Result<Vec<f64>> {
    read_floats(std::io::BufReader::new(std::fs::File::open(path)?))
}

/// One matrix row per CSV record, no header.
pub fn write_matrix_csv<W: Write>(w: W, m: &DMatrix<f64>) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for row in m.row_iter() {
        out.write_record(row.iter().map(|v| v.to_string()))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_matrix_csv<R: Read>(r: R) -> Result<DMatrix<f64>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(false).from_reader(r);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|e| Error::Format(format!("bad number {f:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::DimensionMismatch { expected: first.len(), got: row.len() });
            }
        }
        rows.push(row);
    }
    let m = rows.len();
    let n = rows.first().map_or(0, |r| r.len());
    Ok(DMatrix::from_row_iterator(m, n, rows.into_iter().flatten()))
}

/// Parses a JSON config, checking `schema_version` before the typed parse so
/// that version errors are reported as such.
pub fn parse_config<T: DeserializeOwned>(text: &str, schema_version: u64) -> Result<T> {
    let raw: serde_json::Value = serde_json::from_str(text)?;
    match raw.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == schema_version => {}
        Some(v) => return Err(Error::Format(format!("unsupported schema_version {v}, expected {schema_version}"))),
        None => return Err(Error::Format("config lacks a numeric schema_version".into())),
    }
    Ok(serde_json::from_value(raw)?)
}

pub fn load_config<T: DeserializeOwned>(path: &Path, schema_version: u64) -> Result<T> {
    parse_config(&std::fs::read_to_string(path)?, schema_version)
}
