//! Per-slice tabular records joining uncertainty measures with GT-based
//! metrics, and their CSV serialization.

use std::path::Path;

use crate::error::{Error, Result};
use crate::mhd::write_atomic;

/// One row per (case, axial slice). Measure and metric columns are `None`
/// when undefined (no foreground, or no ground truth available).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SliceRecord {
    pub case_id: String,
    pub slice_index: usize,
    pub n_fg: usize,
    pub type1: Option<f64>,
    pub type2: Option<f64>,
    pub type3: Option<f64>,
    pub dsc: Option<f64>,
    pub hd_mm: Option<f64>,
    pub msd_mm: Option<f64>,
    pub hd95_mm: Option<f64>,
}

pub const CSV_HEADER: [&str; 10] = [
    "case_id", "slice_index", "n_fg", "type1", "type2", "type3", "dsc", "hd_mm", "msd_mm",
    "hd95_mm",
];

fn fmt_opt(v: Option<f64>) -> String {
    // Default f64 formatting is shortest-round-trip, so the CSV is lossless.
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_opt(s: &str, row: usize) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>().map(Some).map_err(|_| Error::MalformedCsv {
        row,
        reason: format!("bad number `{s}`"),
    })
}

pub fn write_slice_records(records: &[SliceRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)
        .map_err(|e| Error::MalformedCsv { row: 0, reason: e.to_string() })?;
    for r in records {
        w.write_record(&[
            r.case_id.clone(),
            r.slice_index.to_string(),
            r.n_fg.to_string(),
            fmt_opt(r.type1),
            fmt_opt(r.type2),
            fmt_opt(r.type3),
            fmt_opt(r.dsc),
            fmt_opt(r.hd_mm),
            fmt_opt(r.msd_mm),
            fmt_opt(r.hd95_mm),
        ])
        .map_err(|e| Error::MalformedCsv { row: 0, reason: e.to_string() })?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::MalformedCsv { row: 0, reason: e.to_string() })?;
    write_atomic(path, &bytes)
}

pub fn read_slice_records(path: &Path) -> Result<Vec<SliceRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::MalformedCsv { row: 0, reason: e.to_string() })?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2; // 1-based, after header
        let rec = rec.map_err(|e| Error::MalformedCsv { row, reason: e.to_string() })?;
        if rec.len() != CSV_HEADER.len() {
            return Err(Error::MalformedCsv {
                row,
                reason: format!("expected {} fields, got {}", CSV_HEADER.len(), rec.len()),
            });
        }
        let int = |s: &str| -> Result<usize> {
            s.parse().map_err(|_| Error::MalformedCsv {
                row,
                reason: format!("bad integer `{s}`"),
            })
        };
        out.push(SliceRecord {
            case_id: rec[0].to_string(),
            slice_index: int(&rec[1])?,
            n_fg: int(&rec[2])?,
            type1: parse_opt(&rec[3], row)?,
            type2: parse_opt(&rec[4], row)?,
            type3: parse_opt(&rec[5], row)?,
            dsc: parse_opt(&rec[6], row)?,
            hd_mm: parse_opt(&rec[7], row)?,
            msd_mm: parse_opt(&rec[8], row)?,
            hd95_mm: parse_opt(&rec[9], row)?,
        });
    }
    Ok(out)
}
