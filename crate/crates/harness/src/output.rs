//! Result tables, manifest and on-disk layout.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::HarnessError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl Cell {
    pub fn opt(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Num(v) => Some(v),
            Cell::Int(v) => Some(v as f64),
            _ => None,
        }
    }

    fn write(&self, out: &mut String) {
        match self {
            Cell::Num(v) => format_float(*v, out),
            Cell::Int(v) => write!(out, "{v}").unwrap(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => {
                write!(out, "\"{}\"", s.replace('"', "\"\"").replace('\n', " ")).unwrap()
            }
            Cell::Text(s) => out.push_str(s),
            Cell::Empty => {}
        }
    }
}

/// 17 significant digits, so every `f64` round-trips.
fn format_float(v: f64, out: &mut String) {
    if v.is_finite() {
        write!(out, "{v:.16e}").unwrap();
    } else if v.is_nan() {
        out.push_str("nan");
    } else if v > 0.0 {
        out.push_str("inf");
    } else {
        out.push_str("-inf");
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width of table {}", self.name);
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric values of a column; non-numeric cells become `None`.
    pub fn column(&self, name: &str) -> Vec<Option<f64>> {
        let i = self
            .column_index(name)
            .unwrap_or_else(|| panic!("table {} has no column {name}", self.name));
        self.rows.iter().map(|r| r[i].as_f64()).collect()
    }

    pub fn text_column(&self, name: &str) -> Vec<String> {
        let i = self
            .column_index(name)
            .unwrap_or_else(|| panic!("table {} has no column {name}", self.name));
        self.rows
            .iter()
            .map(|r| match &r[i] {
                Cell::Text(s) => s.clone(),
                _ => String::new(),
            })
            .collect()
    }

    pub fn to_csv(&self, config_hash: &str) -> String {
        let mut out = String::new();
        writeln!(out, "# config-hash: {config_hash}").unwrap();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                cell.write(&mut out);
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub name: String,
    pub svg: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub scenario: String,
    pub config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
    pub code_version: String,
    pub tables: Vec<String>,
    pub plots: Vec<String>,
    /// Scalar results of the run (fitted slopes, frequencies, ...).
    pub summary: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultSet {
    pub manifest: Manifest,
    /// The exact bytes the config hash was taken over.
    pub config_json: String,
    pub tables: Vec<Table>,
    pub plots: Vec<Plot>,
}

impl ResultSet {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn summary(&self, key: &str) -> Option<f64> {
        self.manifest.summary.get(key).copied()
    }

    /// Record the wall-clock time of the run in the manifest.
    pub fn stamp(&mut self) {
        self.manifest.timestamp = Some(chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
    }

    /// Error strings of failed sweep points, if the table has an `error`
    /// column.
    pub fn failures(&self) -> Vec<String> {
        self.tables
            .iter()
            .filter(|t| t.column_index("error").is_some())
            .flat_map(|t| t.text_column("error"))
            .filter(|e| !e.is_empty())
            .collect()
    }

    /// Writes `config.json`, one CSV per table, one SVG per plot and
    /// `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        let put = |name: String, body: &str| {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| HarnessError::io(&path, e))
        };
        put("config.json".into(), &self.config_json)?;
        for t in &self.tables {
            put(format!("{}.csv", t.name), &t.to_csv(&self.manifest.config_hash))?;
        }
        for p in &self.plots {
            put(format!("{}.svg", p.name), &p.svg)?;
        }
        let mut manifest = serde_json::to_string_pretty(&self.manifest)?;
        manifest.push('\n');
        put("manifest.json".into(), &manifest)
    }
}
