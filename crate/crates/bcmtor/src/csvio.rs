//! CSV persistence for operators, profiles and reports.
//!
//! Matrices carry a two-line header (dimensions; quadrature weights) and are
//! written row-major with 17 significant digits, which round-trips f64
//! exactly.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linop::{LinOp, SpaceDesc};

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Serializes an operator matrix with its weights.
pub fn write_matrix(op: &LinOp) -> String {
    let mut out = String::new();
    out.push_str(&format!("# rows={} cols={}\n", op.cod.n, op.dom.n));
    out.push_str(&format!("# w_cod={} w_dom={}\n", fmt(op.cod.weight), fmt(op.dom.weight)));
    for i in 0..op.cod.n {
        let row: Vec<String> = (0..op.dom.n).map(|j| fmt(op.mat[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn parse_kv(line: &str, key: &str) -> Result<f64> {
    line.split_whitespace()
        .filter_map(|tok| tok.strip_prefix(&format!("{key}=")))
        .next()
        .ok_or_else(|| Error::CsvFormat(format!("missing {key} in header line '{line}'")))?
        .parse()
        .map_err(|e| Error::CsvFormat(format!("bad {key}: {e}")))
}

/// Reads a matrix written by [`write_matrix`]; spaces come back as abstract
/// spaces carrying the stored weights.
pub fn read_matrix(text: &str) -> Result<LinOp> {
    let mut lines = text.lines();
    let dims = lines.next().ok_or_else(|| Error::CsvFormat("empty file".into()))?;
    let rows = parse_kv(dims, "rows")? as usize;
    let cols = parse_kv(dims, "cols")? as usize;
    let weights = lines.next().ok_or_else(|| Error::CsvFormat("missing weight header".into()))?;
    let w_cod = parse_kv(weights, "w_cod")?;
    let w_dom = parse_kv(weights, "w_dom")?;
    let mut mat = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        let line = lines
            .next()
            .ok_or_else(|| Error::CsvFormat(format!("expected {rows} rows, file ends at {i}")))?;
        let mut count = 0;
        for (j, tok) in line.split(',').enumerate() {
            if j >= cols {
                return Err(Error::CsvFormat(format!("row {i} has more than {cols} entries")));
            }
            mat[(i, j)] = tok
                .trim()
                .parse()
                .map_err(|e| Error::CsvFormat(format!("row {i}, col {j}: {e}")))?;
            count += 1;
        }
        if count != cols {
            return Err(Error::CsvFormat(format!("row {i} has {count} entries, expected {cols}")));
        }
    }
    LinOp::new(
        mat,
        SpaceDesc { weight: w_dom, ..SpaceDesc::abstract_space(cols) },
        SpaceDesc { weight: w_cod, ..SpaceDesc::abstract_space(rows) },
    )
}

/// Writes a plain table: a header row then one row per index.
pub fn write_table(headers: &[&str], columns: &[&[f64]]) -> String {
    assert_eq!(headers.len(), columns.len(), "one header per column");
    let rows = columns.first().map_or(0, |c| c.len());
    assert!(columns.iter().all(|c| c.len() == rows), "ragged table");
    let mut out = String::new();
    out.push_str(&headers.join(","));
    out.push('\n');
    for i in 0..rows {
        let row: Vec<String> = columns.iter().map(|c| fmt(c[i])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
