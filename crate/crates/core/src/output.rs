//! CSV and JSON emission with a fixed numeric format.
//!
//! Numbers are written like C's `%.9e` (`1.234567890e-03`), comma
//! delimited, LF line endings, so that repeated runs diff byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Formats `x` as C's `%.9e`.
pub fn sci(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.9e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

/// Renders a CSV document with one header line.
pub fn csv_string<R: AsRef<[f64]>>(header: &[&str], rows: &[R]) -> String {
    let mut out = String::with_capacity(rows.len() * header.len() * 17);
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let mut first = true;
        for &v in row.as_ref() {
            if !first {
                out.push(',');
            }
            first = false;
            let _ = write!(out, "{}", sci(v));
        }
        out.push('\n');
    }
    out
}

/// Writes via a temporary file and rename, so readers never see a partial
/// file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension("partial");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_csv<R: AsRef<[f64]>>(path: &Path, header: &[&str], rows: &[R]) -> Result<()> {
    write_atomic(path, csv_string(header, rows).as_bytes())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Numeric CSV table as read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}

pub fn parse_csv(text: &str) -> Result<Table> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((_, head)) = lines.next() else {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: "empty CSV".into(),
        });
    };
    let header: Vec<String> = head.split(',').map(|h| h.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (i, line) in lines {
        let mut row = Vec::with_capacity(header.len());
        let mut column = 1;
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line: i + 1,
                column,
                message: format!("not a number: {field:?}"),
            })?;
            row.push(v);
            column += field.len() + 1;
        }
        if row.len() != header.len() {
            return Err(Error::Parse {
                line: i + 1,
                column: 1,
                message: format!("expected {} fields, found {}", header.len(), row.len()),
            });
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

pub fn read_csv(path: &Path) -> Result<Table> {
    parse_csv(&fs::read_to_string(path)?)
}
