//! Versioned CSV tables and their JSON twin.
//!
//! A CSV report is a block of `#key: value` comment lines followed by a
//! plain CSV table:
//!
//! ```text
//! #skewlimit-csv v1
//! #kind: converge
//! #seed: 2024
//! #config: {...}
//! eps,n,upper,...
//! 0.2,4000,...
//! ```
//!
//! Floats are written with Rust's shortest round-trip formatting, missing
//! values as empty cells.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Map, Value};
use thiserror::Error;

pub const CSV_SCHEMA_LINE: &str = "#skewlimit-csv v1";
pub const JSON_SCHEMA: &str = "skewlimit-json v1";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("missing schema line `{CSV_SCHEMA_LINE}`")]
    MissingSchema,
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// A table with its metadata. Cells are kept as the exact strings that
/// are written, so reading a report back is lossless.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Table {
    /// `(key, value)` comment lines after the schema line, in order.
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn float(x: f64) -> String {
    format!("{x}")
}

pub fn opt_float(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            meta: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<String>) -> Self {
        self.meta.push((key.to_string(), value.into()));
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Parsed cell; `None` for empty cells or unknown columns.
    pub fn get_f64(&self, row: usize, name: &str) -> Option<f64> {
        let c = self.column(name)?;
        self.rows.get(row)?.get(c)?.parse().ok()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(CSV_SCHEMA_LINE);
        out.push('\n');
        for (k, v) in &self.meta {
            debug_assert!(!v.contains('\n') && !k.contains(':'));
            let _ = writeln!(out, "#{k}: {v}");
        }
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        let body = w.into_inner().expect("in-memory flush");
        out.push_str(std::str::from_utf8(&body).expect("utf-8 cells"));
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, ReportError> {
        let mut lines = text.split_inclusive('\n');
        match lines.next() {
            Some(l) if l.trim_end_matches('\n') == CSV_SCHEMA_LINE => {}
            _ => return Err(ReportError::MissingSchema),
        }
        let mut consumed = CSV_SCHEMA_LINE.len() + 1;
        let mut meta = Vec::new();
        for (i, line) in lines.enumerate() {
            let Some(rest) = line.strip_prefix('#') else {
                break;
            };
            let rest = rest.trim_end_matches('\n');
            let (k, v) = rest
                .split_once(": ")
                .ok_or_else(|| ReportError::Malformed {
                    line: i + 2,
                    message: format!("metadata line without `key: value`: {rest}"),
                })?;
            meta.push((k.to_string(), v.to_string()));
            consumed += line.len();
        }
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(&text.as_bytes()[consumed..]);
        let columns: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec?.iter().map(str::to_string).collect());
        }
        Ok(Self {
            meta,
            columns,
            rows,
        })
    }

    /// JSON record: metadata (with `config` decoded), the table as row
    /// objects, and `details` for structured results.
    pub fn to_json(&self, details: Value) -> String {
        let mut header = Map::new();
        for (k, v) in &self.meta {
            let value = if k == "config" {
                serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.clone()))
            } else {
                Value::String(v.clone())
            };
            header.insert(k.clone(), value);
        }
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, cell)| (c.clone(), cell_value(cell)))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        let doc = json!({
            "schema": JSON_SCHEMA,
            "meta": header,
            "columns": self.columns,
            "rows": rows,
            "details": details,
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("json");
        s.push('\n');
        s
    }
}

fn cell_value(cell: &str) -> Value {
    if cell.is_empty() {
        return Value::Null;
    }
    if let Ok(i) = cell.parse::<i64>() {
        return Value::from(i);
    }
    match cell.parse::<f64>() {
        Ok(x) if x.is_finite() => Value::from(x),
        _ => Value::String(cell.to_string()),
    }
}

pub fn details<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("serializable report")
}

pub fn write_file(path: &Path, contents: &str) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, contents)
}
