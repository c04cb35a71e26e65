//! CSV emission and parsing for [`ResultsTable`].
//!
//! Format: leading `#`-prefixed metadata lines, a header row, then data
//! rows; numbers carry 17 significant digits so a parse recovers every f64
//! bit-exactly. The file is newline-terminated.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use super::table::{Cell, ResultsTable};

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed csv: {0}")]
    Malformed(String),
}

/// Render a table to CSV bytes.
pub fn to_csv_string(table: &ResultsTable) -> String {
    let mut out = String::new();
    for (k, v) in &table.metadata {
        out.push_str(&format!("# {k} = {v}\n"));
    }
    out.push_str(&table.columns.join(","));
    out.push('\n');
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Write a table to `path` as CSV.
pub fn emit_csv(table: &ResultsTable, path: &Path) -> Result<(), CsvError> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(to_csv_string(table).as_bytes())?;
    Ok(())
}

/// Parse CSV text produced by [`to_csv_string`].
pub fn parse_csv(text: &str) -> Result<ResultsTable, CsvError> {
    let mut metadata = Vec::new();
    let mut lines = text.lines().peekable();
    while let Some(line) = lines.peek() {
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once('=') {
                metadata.push((k.trim().to_string(), v.trim().to_string()));
            }
            lines.next();
        } else {
            break;
        }
    }
    let header = lines.next().ok_or_else(|| CsvError::Malformed("missing header row".into()))?;
    let columns: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let mut table = ResultsTable::new(columns);
    table.metadata = metadata;
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<Cell> = line
            .split(',')
            .map(|s| {
                let s = s.trim();
                match s.parse::<f64>() {
                    Ok(v) => Cell::Num(v),
                    Err(_) => Cell::Text(s.to_string()),
                }
            })
            .collect();
        table
            .push_row(cells)
            .map_err(|e| CsvError::Malformed(format!("line {}: {e}", lineno + 2)))?;
    }
    Ok(table)
}

/// Read and parse a CSV file.
pub fn read_csv(path: &Path) -> Result<ResultsTable, CsvError> {
    parse_csv(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_is_header_and_metadata_only() {
        let t = ResultsTable::new(vec!["x".into(), "y".into()]).with_metadata("seed", 7);
        let s = to_csv_string(&t);
        assert_eq!(s, "# seed = 7\nx,y\n");
    }

    #[test]
    fn roundtrip_exact() {
        let mut t = ResultsTable::new(vec!["beta".into(), "mse".into(), "family".into()])
            .with_metadata("seed", 42);
        t.push_row(vec![0.1.into(), (1.0 / 3.0).into(), Cell::text("mask")]).unwrap();
        t.push_row(vec![0.2.into(), 7.25e-31.into(), Cell::text("gn")]).unwrap();
        let parsed = parse_csv(&to_csv_string(&t)).unwrap();
        assert_eq!(parsed, t);
    }

    #[test]
    fn column_order_preserved() {
        let t = ResultsTable::new(vec!["c".into(), "a".into(), "b".into()]);
        let s = to_csv_string(&t);
        assert!(s.starts_with("c,a,b\n"));
    }
}
