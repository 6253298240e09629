//! Capture-table file format.
//!
//! Self-describing text format, one header field per line followed by one
//! line per table row. Probabilities are written with 17 significant
//! digits so that save → load reproduces every `f64` bit-exactly:
//!
//! ```text
//! # aloha-csmud capture table
//! version: 1
//! t_max: 2
//! source: monte-carlo
//! snr_db: 10
//! t_sim: 10000
//! seed: 42
//! phy_hash: 00ff00ff00ff00ff
//! rows:
//! 1 1.5000000000000000e-1 8.5000000000000004e-1
//! 2 ...
//! ```
//!
//! Optional metadata fields hold `none` when absent.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::capture::{CaptureTable, TableMeta, TableSource};
use crate::error::{Error, Result};

const FORMAT_VERSION: u32 = 1;

/// Serialize a table to its text form.
pub fn table_to_string(table: &CaptureTable) -> String {
    let meta = table.meta();
    let mut out = String::new();
    out.push_str("# aloha-csmud capture table\n");
    let _ = writeln!(out, "version: {FORMAT_VERSION}");
    let _ = writeln!(out, "t_max: {}", table.t_max());
    let _ = writeln!(out, "source: {}", meta.source.as_str());
    let _ = writeln!(out, "snr_db: {}", opt_f64(meta.snr_db));
    let _ = writeln!(out, "t_sim: {}", opt_u64(meta.t_sim));
    let _ = writeln!(out, "seed: {}", opt_u64(meta.seed));
    let _ = writeln!(out, "phy_hash: {}", meta.phy_hash.as_deref().unwrap_or("none"));
    out.push_str("rows:\n");
    for t_a in 1..=table.t_max() {
        let _ = write!(out, "{t_a}");
        for &p in table.row(t_a) {
            let _ = write!(out, " {p:.16e}");
        }
        out.push('\n');
    }
    out
}

/// Write a table to `path` (atomically via a sibling temp file).
pub fn save_table(table: &CaptureTable, path: &Path) -> Result<()> {
    let text = table_to_string(table);
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Parse a table from its text form. `origin` is used in error messages.
pub fn table_from_str(text: &str, origin: &Path) -> Result<CaptureTable> {
    let perr = |msg: String| Error::parse(origin, msg);
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));

    let mut version: Option<u32> = None;
    let mut t_max: Option<usize> = None;
    let mut source: Option<TableSource> = None;
    let mut snr_db: Option<f64> = None;
    let mut t_sim: Option<u64> = None;
    let mut seed: Option<u64> = None;
    let mut phy_hash: Option<String> = None;

    loop {
        let line = lines
            .next()
            .ok_or_else(|| perr("unexpected end of file before 'rows:'".into()))?;
        if line == "rows:" {
            break;
        }
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| perr(format!("malformed header line '{line}'")))?;
        let value = value.trim();
        match key.trim() {
            "version" => {
                version = Some(
                    value
                        .parse()
                        .map_err(|_| perr(format!("bad version '{value}'")))?,
                )
            }
            "t_max" => {
                t_max = Some(
                    value
                        .parse()
                        .map_err(|_| perr(format!("bad t_max '{value}'")))?,
                )
            }
            "source" => {
                source = Some(
                    TableSource::parse(value)
                        .ok_or_else(|| perr(format!("unknown source '{value}'")))?,
                )
            }
            "snr_db" => snr_db = parse_opt(value, origin, "snr_db")?,
            "t_sim" => t_sim = parse_opt(value, origin, "t_sim")?,
            "seed" => seed = parse_opt(value, origin, "seed")?,
            "phy_hash" => {
                phy_hash = if value == "none" {
                    None
                } else {
                    Some(value.to_string())
                }
            }
            other => return Err(perr(format!("unknown header field '{other}'"))),
        }
    }

    match version {
        Some(FORMAT_VERSION) => {}
        Some(v) => return Err(perr(format!("unsupported format version {v}"))),
        None => return Err(perr("missing version field".into())),
    }
    let t_max = t_max.ok_or_else(|| perr("missing t_max field".into()))?;
    let source = source.ok_or_else(|| perr("missing source field".into()))?;

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(t_max);
    for line in lines {
        let mut parts = line.split_whitespace();
        let t_a: usize = parts
            .next()
            .unwrap()
            .parse()
            .map_err(|_| perr(format!("bad row index in '{line}'")))?;
        if t_a != rows.len() + 1 {
            return Err(perr(format!(
                "row index {t_a} out of order, expected {}",
                rows.len() + 1
            )));
        }
        let probs: Vec<f64> = parts
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| perr(format!("bad probability '{p}' in row {t_a}")))
            })
            .collect::<Result<_>>()?;
        if probs.len() != t_a + 1 {
            return Err(perr(format!(
                "row t_A={t_a} has {} probabilities, expected {}",
                probs.len(),
                t_a + 1
            )));
        }
        rows.push(probs);
    }
    if rows.len() != t_max {
        return Err(perr(format!(
            "t_max mismatch: header says {t_max}, found {} rows",
            rows.len()
        )));
    }

    let meta = TableMeta {
        source,
        snr_db,
        t_sim,
        seed,
        phy_hash,
    };
    // from_rows enforces row sums and probability ranges
    CaptureTable::from_rows(rows, meta)
        .map_err(|e| perr(format!("table validation failed: {e}")))
}

/// Load a capture table from `path`.
pub fn load_table(path: &Path) -> Result<CaptureTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    table_from_str(&text, path)
}

fn opt_f64(v: Option<f64>) -> String {
    v.map_or_else(|| "none".into(), |x| format!("{x}"))
}

fn opt_u64(v: Option<u64>) -> String {
    v.map_or_else(|| "none".into(), |x| format!("{x}"))
}

fn parse_opt<T: std::str::FromStr>(value: &str, origin: &Path, field: &str) -> Result<Option<T>> {
    if value == "none" {
        return Ok(None);
    }
    value
        .parse::<T>()
        .map(Some)
        .map_err(|_| Error::parse(origin, format!("bad {field} value '{value}'")))
}
