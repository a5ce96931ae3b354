//! The single CSV formatter used by every command.
//!
//! Floats are written with Rust's `{:e}` formatter: shortest round-trip
//! digits in scientific notation, so `0.5` is always `5e-1`. Output is
//! UTF-8 with `\n` line endings and is byte-identical for identical input.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::I(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::I(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::I(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_owned())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::S(v)
    }
}

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("non-finite value {value} at row {row}, column `{column}`")]
    NonFinite { row: usize, column: String, value: f64 },
    #[error("row {row} has {got} cells, header has {expected}")]
    Ragged { row: usize, expected: usize, got: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub fn format_float(v: f64) -> String {
    format!("{v:e}")
}

/// A named table, written to `<dir>/<name>.csv` by the verify suite.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|h| (*h).to_owned()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        self.rows.push(row);
    }

    pub fn render(&self) -> Result<Vec<u8>, CsvError> {
        let header: Vec<&str> = self.header.iter().map(String::as_str).collect();
        render(&header, &self.rows)
    }
}

/// Renders header and rows; refuses ragged rows and non-finite floats.
pub fn render(header: &[&str], rows: &[Vec<Cell>]) -> Result<Vec<u8>, CsvError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header)?;
    for (r, row) in rows.iter().enumerate() {
        if row.len() != header.len() {
            return Err(CsvError::Ragged {
                row: r,
                expected: header.len(),
                got: row.len(),
            });
        }
        let mut fields = Vec::with_capacity(row.len());
        for (c, cell) in row.iter().enumerate() {
            fields.push(match cell {
                Cell::F(v) if !v.is_finite() => {
                    return Err(CsvError::NonFinite {
                        row: r,
                        column: header[c].to_owned(),
                        value: *v,
                    })
                }
                Cell::F(v) => format_float(*v),
                Cell::I(v) => v.to_string(),
                Cell::S(s) => s.clone(),
            });
        }
        w.write_record(&fields)?;
    }
    w.flush()?;
    w.into_inner().map_err(|e| CsvError::Io(e.into_error()))
}

/// Renders fully before touching the file, so a refused table leaves no
/// partial output.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<Cell>]) -> Result<(), CsvError> {
    let bytes = render(header, rows)?;
    let mut f = File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}
