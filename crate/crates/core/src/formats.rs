//! On-disk formats: GXSM binary score files and `index,label` CSVs.
//!
//! GXSM layout, all integers little-endian:
//!
//! | offset | size | field                     |
//! |--------|------|---------------------------|
//! | 0      | 4    | magic `b"GXSM"`           |
//! | 4      | 2    | version, `1`              |
//! | 6      | 2    | reserved, `0`             |
//! | 8      | 8    | `N` (u64)                 |
//! | 16     | 8    | `K` (u64)                 |
//! | 24     | 4NK  | f32 probabilities, row-major |

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::labels::{ClassId, ExampleId, LabeledSet};
use crate::scores::ScoreMatrix;
use crate::strategies::Batch;

pub const GXSM_MAGIC: &[u8; 4] = b"GXSM";
pub const GXSM_VERSION: u16 = 1;
pub const GXSM_HEADER_LEN: usize = 24;

/// Total byte length of a GXSM file holding an `n x k` matrix.
pub fn gxsm_len(n: u64, k: u64) -> Option<u64> {
    n.checked_mul(k)?.checked_mul(4)?.checked_add(GXSM_HEADER_LEN as u64)
}

pub fn encode_gxsm(s: &ScoreMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(GXSM_HEADER_LEN + 4 * s.as_slice().len());
    out.extend_from_slice(GXSM_MAGIC);
    out.extend_from_slice(&GXSM_VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&(s.n() as u64).to_le_bytes());
    out.extend_from_slice(&(s.k() as u64).to_le_bytes());
    for v in s.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_gxsm(bytes: &[u8]) -> Result<ScoreMatrix> {
    if bytes.len() < GXSM_HEADER_LEN {
        return Err(Error::format(format!(
            "score file is {} bytes, shorter than the {GXSM_HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if &bytes[0..4] != GXSM_MAGIC {
        return Err(Error::format("score file does not start with magic GXSM"));
    }
    let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let version = u16_at(4);
    if version != GXSM_VERSION {
        return Err(Error::format(format!("unsupported GXSM version {version}")));
    }
    let reserved = u16_at(6);
    if reserved != 0 {
        return Err(Error::format(format!("GXSM reserved field is {reserved}, expected 0")));
    }
    let (n, k) = (u64_at(8), u64_at(16));
    let expected = gxsm_len(n, k)
        .ok_or_else(|| Error::format(format!("GXSM dimensions N={n} K={k} overflow")))?;
    if bytes.len() as u64 != expected {
        return Err(Error::format(format!(
            "score file for N={n} K={k} must be {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let data = bytes[GXSM_HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    ScoreMatrix::new(n as usize, k as usize, data)
}

pub fn write_gxsm(path: &Path, s: &ScoreMatrix) -> Result<()> {
    fs::write(path, encode_gxsm(s)).map_err(|e| Error::io(path, e))
}

pub fn read_gxsm(path: &Path) -> Result<ScoreMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_gxsm(&bytes)
}

fn csv_err(e: csv::Error) -> Error {
    Error::format(format!("csv: {e}"))
}

/// Plain CSV scores, one row of `K` probabilities per example. A non-numeric
/// first line is taken as a header.
pub fn parse_scores_csv<R: Read>(reader: R) -> Result<ScoreMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f32>> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let parsed: std::result::Result<Vec<f32>, _> = rec.iter().map(str::parse::<f32>).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if line == 0 => continue,
            Err(e) => return Err(Error::format(format!("score csv line {}: {e}", line + 1))),
        }
    }
    ScoreMatrix::from_rows(&rows)
}

pub fn read_scores_csv(path: &Path) -> Result<ScoreMatrix> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_scores_csv(f)
}

pub fn write_scores_csv<W: Write>(writer: W, s: &ScoreMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in s.rows() {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::format(e.to_string()))
}

/// Reads an `index,label` CSV in file order. Rows must have unique indices.
pub fn parse_labels_csv<R: Read>(reader: R) -> Result<LabeledSet> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.len() < 2 || &headers[0] != "index" || &headers[1] != "label" {
        return Err(Error::format(format!(
            "label csv header must be `index,label`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut set = LabeledSet::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let field = |i: usize| -> Result<usize> {
            rec.get(i)
                .ok_or_else(|| Error::format(format!("label csv row {}: missing column", line + 2)))?
                .parse::<usize>()
                .map_err(|e| Error::format(format!("label csv row {}: {e}", line + 2)))
        };
        let (idx, label) = (field(0)?, field(1)?);
        set.insert(ExampleId(idx), ClassId(label))
            .map_err(|_| Error::format(format!("label csv row {}: duplicate index {idx}", line + 2)))?;
    }
    Ok(set)
}

pub fn read_labels_csv(path: &Path) -> Result<LabeledSet> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_labels_csv(f)
}

pub fn write_labels_csv<W: Write>(writer: W, labeled: &LabeledSet) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["index", "label"]).map_err(csv_err)?;
    for (id, c) in labeled.iter() {
        w.write_record([id.0.to_string(), c.0.to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::format(e.to_string()))
}

pub fn save_labels_csv(path: &Path, labeled: &LabeledSet) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_labels_csv(f, labeled)
}

/// `index` column only, one selected id per row.
pub fn write_ids_csv<W: Write>(writer: W, ids: &[ExampleId]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["index"]).map_err(csv_err)?;
    for id in ids {
        w.write_record([id.0.to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::format(e.to_string()))
}

/// Executed sequential batch: `index,label,provenance` in query order.
pub fn write_executed_batch_csv<W: Write>(writer: W, batch: &Batch, labeled: &LabeledSet) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["index", "label", "provenance"]).map_err(csv_err)?;
    for (id, tag) in batch.ids.iter().zip(&batch.provenance) {
        let label = labeled
            .get(*id)
            .map(|c| c.0.to_string())
            .unwrap_or_default();
        w.write_record([id.0.to_string(), label, tag.to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::format(e.to_string()))
}
