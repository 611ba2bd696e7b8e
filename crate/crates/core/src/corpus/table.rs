use std::path::{Path, PathBuf};

use crate::{Error, Result};

/// A header-indexed TSV file held in memory.
pub(crate) struct Table {
    pub path: PathBuf,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Table> {
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(b'\t')
            .has_headers(true)
            .flexible(false)
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        let header = reader
            .headers()
            .map_err(|e| csv_error(path, e))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            rows.push(rec.iter().map(|s| s.trim().to_string()).collect());
        }
        Ok(Table {
            path: path.to_path_buf(),
            header,
            rows,
        })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.column(name).ok_or_else(|| Error::MissingColumn {
            path: self.path.clone(),
            column: name.to_string(),
        })
    }

    /// Line number of a data row, counting the header as line 1.
    pub fn line(row: usize) -> usize {
        row + 2
    }

    pub fn parse_err(&self, row: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line: Self::line(row),
            msg: msg.into(),
        }
    }

    pub fn int(&self, row: usize, col: usize) -> Result<i64> {
        let s = &self.rows[row][col];
        s.parse::<i64>()
            .map_err(|_| self.parse_err(row, format!("non-integer value `{s}` in column `{}`", self.header[col])))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        csv::ErrorKind::UnequalLengths { pos, expected_len, len } => Error::Parse {
            path: path.to_path_buf(),
            line: pos.map(|p| p.line() as usize).unwrap_or(0),
            msg: format!("expected {expected_len} fields, found {len}"),
        },
        other => Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: format!("{other:?}"),
        },
    }
}

/// Parses a bracketed comma-separated integer list such as `[5,9]`.
pub(crate) fn parse_int_list(s: &str) -> Option<Vec<i64>> {
    let inner = s.trim().strip_prefix('[')?.strip_suffix(']')?.trim();
    if inner.is_empty() {
        return Some(Vec::new());
    }
    inner.split(',').map(|t| t.trim().parse::<i64>().ok()).collect()
}
