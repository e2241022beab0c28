//! Plain numeric CSV tables: one header row, then comma-separated decimals.
//!
//! Values are written with Rust's shortest round-trip formatting, so a
//! write followed by a read reproduces every `f64` bit for bit.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Header names and column-major values of a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

/// Read a numeric CSV. Parse errors carry the 1-based file line number.
pub fn read_table(path: &Path) -> Result<Table> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let parse_err = |row: usize, detail: String| Error::Parse {
        path: path.into(),
        row,
        detail,
    };
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut columns = vec![Vec::new(); headers.len()];
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| parse_err(line, e.to_string()))?;
        if record.len() != headers.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", headers.len(), record.len()),
            ));
        }
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, format!("cannot parse {field:?} as a number")))?;
            if !v.is_finite() {
                return Err(parse_err(
                    line,
                    format!("non-finite value in column {}", headers[c]),
                ));
            }
            columns[c].push(v);
        }
    }
    Ok(Table { headers, columns })
}

/// Read a CSV whose header must equal `expected` exactly.
pub fn read_columns(path: &Path, expected: &[&str]) -> Result<Vec<Vec<f64>>> {
    let table = read_table(path)?;
    if table.headers != expected {
        return Err(Error::Parse {
            path: path.into(),
            row: 1,
            detail: format!(
                "expected header {:?}, found {:?}",
                expected.join(","),
                table.headers.join(",")
            ),
        });
    }
    Ok(table.columns)
}

/// Write equal-length columns under the given header.
pub fn write_columns(path: &Path, headers: &[&str], columns: &[&[f64]]) -> Result<()> {
    assert_eq!(headers.len(), columns.len(), "one header per column");
    let rows = columns.first().map_or(0, |c| c.len());
    assert!(columns.iter().all(|c| c.len() == rows), "columns differ in length");
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path, e);
    writeln!(w, "{}", headers.join(",")).map_err(io_err)?;
    let mut line = String::new();
    for r in 0..rows {
        line.clear();
        for (c, col) in columns.iter().enumerate() {
            if c > 0 {
                line.push(',');
            }
            line.push_str(&format_value(col[r]));
        }
        writeln!(w, "{line}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

fn format_value(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}
