//! Score and label CSV files.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::error::{CliError, Result};

/// A header row plus a numeric body.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Array2<f64>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.column(k).to_vec())
    }
}

fn looks_numeric(field: &str) -> bool {
    field.trim().parse::<f64>().is_ok()
}

/// Reads a comma-separated file whose first row names the columns.
pub fn read_table(path: &Path) -> Result<Table> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::input(path, format!("unreadable header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(CliError::input(path, "missing header row"));
    }
    if header.iter().any(|h| looks_numeric(h)) {
        return Err(CliError::input(
            path,
            "missing header row (first line is numeric; expected column names)",
        ));
    }
    let width = header.len();
    let mut values = Vec::new();
    let mut n = 0;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::input(path, format!("line {line}: {e}"))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(CliError::input(
                path,
                format!("line {line}: expected {width} fields, found {}", record.len()),
            ));
        }
        for (k, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                CliError::input(path, format!("line {line}: column '{}': '{field}' is not a number", header[k]))
            })?;
            if !v.is_finite() {
                return Err(CliError::input(
                    path,
                    format!("line {line}: column '{}': value is not finite", header[k]),
                ));
            }
            values.push(v);
        }
        n += 1;
    }
    let rows = Array2::from_shape_vec((n, width), values).expect("row widths checked");
    Ok(Table { header, rows })
}

/// Writes a header and rows; floats use the shortest representation that
/// parses back to the same value.
pub fn write_table<W: Write>(out: W, header: &[&str], columns: &[Vec<String>]) -> std::io::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(header)?;
    let n = columns.first().map_or(0, Vec::len);
    for i in 0..n {
        writer.write_record(columns.iter().map(|c| c[i].as_str()))?;
    }
    writer.flush()
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn fmt_all(values: &[f64]) -> Vec<String> {
    values.iter().map(|&v| fmt_f64(v)).collect()
}
