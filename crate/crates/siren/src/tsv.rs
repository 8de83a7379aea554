//! Tab-separated tables of hex floats: a header of column ids, a `#`
//! provenance line, then one row per line.

use std::fmt::Write;

use siren_core::data::{Dataset, Provenance};
use siren_core::Tensor;

use crate::hexfloat::{format_hex, parse_float};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TsvError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

fn format_err(line: usize, message: impl Into<String>) -> TsvError {
    TsvError::Format { line, message: message.into() }
}

pub fn write_dataset(d: &Dataset) -> String {
    let mut out = d.columns.join("\t");
    out.push('\n');
    writeln!(out, "# gbn={} seed={} n={}", d.provenance.gbn, d.provenance.seed, d.provenance.n).unwrap();
    for r in 0..d.rows.rows() {
        let cells: Vec<String> = d.rows.row_slice(r).iter().map(|&v| format_hex(v)).collect();
        out.push_str(&cells.join("\t"));
        out.push('\n');
    }
    out
}

fn parse_provenance(line: &str, line_no: usize) -> Result<Provenance, TsvError> {
    let mut gbn = None;
    let mut seed = None;
    let mut n = None;
    for field in line.trim_start_matches('#').split_whitespace() {
        let (key, value) = field.split_once('=').ok_or_else(|| format_err(line_no, format!("malformed provenance field `{field}`")))?;
        let bad = || format_err(line_no, format!("invalid value for `{key}`"));
        match key {
            "gbn" => gbn = Some(value.to_string()),
            "seed" => seed = Some(value.parse().map_err(|_| bad())?),
            "n" => n = Some(value.parse().map_err(|_| bad())?),
            _ => return Err(format_err(line_no, format!("unknown provenance field `{key}`"))),
        }
    }
    match (gbn, seed, n) {
        (Some(gbn), Some(seed), Some(n)) => Ok(Provenance { gbn, seed, n }),
        _ => Err(format_err(line_no, "provenance needs gbn, seed and n")),
    }
}

pub fn read_dataset(text: &str) -> Result<Dataset, TsvError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| format_err(1, "empty file"))?;
    let columns: Vec<String> = header.split('\t').map(str::to_string).collect();
    if columns.iter().any(|c| c.is_empty()) {
        return Err(format_err(1, "empty column id"));
    }
    let (i, prov_line) = lines.next().ok_or_else(|| format_err(2, "missing provenance line"))?;
    if !prov_line.starts_with('#') {
        return Err(format_err(i + 1, "second line must be the `#` provenance line"));
    }
    let provenance = parse_provenance(prov_line, i + 1)?;
    let mut data = Vec::new();
    let mut rows = 0;
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != columns.len() {
            return Err(format_err(i + 1, format!("expected {} fields, found {}", columns.len(), cells.len())));
        }
        for c in cells {
            data.push(parse_float(c).map_err(|e| format_err(i + 1, e.to_string()))?);
        }
        rows += 1;
    }
    let rows = Tensor::from_vec(rows, columns.len(), data);
    Ok(Dataset { columns, rows, provenance })
}
