//! CSV return matrices.
//!
//! The first row holds asset names; each further row is one period of
//! returns as decimal fractions. Row numbers in diagnostics are 1-based file
//! lines (the header is line 1); columns are 1-based.

use std::io::{Read, Write};
use std::path::Path;

use crate::market::MarketReturns;
use crate::{Error, Result};

/// A named matrix with one row per period and one column per asset.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnMatrix {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ReturnMatrix {
    pub fn new(names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::InvalidDimension("matrix has no columns".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != names.len() {
                return Err(Error::Csv {
                    row: i + 2,
                    column: row.len().min(names.len()) + 1,
                    message: format!("expected {} fields, found {}", names.len(), row.len()),
                });
            }
        }
        Ok(Self { names, rows })
    }

    /// Generic `A1..An` names.
    pub fn unnamed(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        Self::new((1..=n).map(|i| format!("A{i}")).collect(), rows)
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let names: Vec<String> = rdr
            .headers()
            .map_err(|e| csv_error(e, 1))?
            .iter()
            .map(str::to_owned)
            .collect();
        if names.is_empty() || names.iter().all(String::is_empty) {
            return Err(Error::Csv {
                row: 1,
                column: 1,
                message: "missing header row".into(),
            });
        }
        let mut rows = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| csv_error(e, line))?;
            let mut row = Vec::with_capacity(record.len());
            for (j, field) in record.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| Error::Csv {
                    row: line,
                    column: j + 1,
                    message: format!("cannot parse {field:?} as a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Csv {
                        row: line,
                        column: j + 1,
                        message: format!("non-finite value {field:?}"),
                    });
                }
                row.push(v);
            }
            rows.push(row);
        }
        Self::new(names, rows)
    }

    pub fn read_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref()).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.as_ref().display()),
            ))
        })?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    pub fn write<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.names).map_err(io_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v}")))
                .map_err(io_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn asset_count(&self) -> usize {
        self.names.len()
    }

    pub fn period_count(&self) -> usize {
        self.rows.len()
    }

    pub fn row_market(&self, i: usize) -> Result<MarketReturns> {
        let row = self
            .rows
            .get(i)
            .ok_or_else(|| Error::InvalidInput(format!("row {i} out of range ({} rows)", self.rows.len())))?;
        MarketReturns::new(row.clone())
    }

    /// The single data row, or an error naming the row count.
    pub fn single_row(&self) -> Result<&[f64]> {
        match self.rows.len() {
            1 => Ok(&self.rows[0]),
            k => Err(Error::InvalidInput(format!(
                "expected exactly one data row, found {k}"
            ))),
        }
    }

    /// Square matrix check (covariance files).
    pub fn square(&self) -> Result<&[Vec<f64>]> {
        if self.rows.len() != self.names.len() {
            return Err(Error::InvalidDimension(format!(
                "expected a {n}x{n} matrix, found {} rows",
                self.rows.len(),
                n = self.names.len()
            )));
        }
        Ok(&self.rows)
    }
}

fn csv_error(e: csv::Error, line: usize) -> Error {
    let (row, column) = match e.kind() {
        csv::ErrorKind::UnequalLengths {
            pos,
            expected_len,
            len,
        } => (
            pos.as_ref().map_or(line, |p| p.line() as usize),
            (*expected_len).min(*len) as usize + 1,
        ),
        _ => (line, 1),
    };
    Error::Csv {
        row,
        column,
        message: e.to_string(),
    }
}

fn io_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}
