//! Artifact writing: tables as CSV or JSON, per-table sidecars, and the
//! manifest that marks a finished run.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::CliError;

/// Present in the output directory while a run is writing.
pub const IN_PROGRESS_MARKER: &str = ".regfbm-in-progress";
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Bool(bool),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Float)
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Float(v) => format_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Float(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Int(v) => json!(v),
            Cell::Bool(v) => json!(v),
            Cell::Text(s) => json!(s),
            Cell::Empty => Value::Null,
        }
    }
}

/// Seventeen significant digits, which round-trips every finite `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: &'static str,
    pub columns: &'static [&'static str],
    pub rows: Vec<Vec<Cell>>,
    pub n_accepted: Option<u64>,
    pub n_proposed: Option<u64>,
}

impl Table {
    pub fn new(name: &'static str, columns: &'static [&'static str]) -> Self {
        Self {
            name,
            columns,
            rows: Vec::new(),
            n_accepted: None,
            n_proposed: None,
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(
            row.len(),
            self.columns.len(),
            "row width for table {}",
            self.name
        );
        self.rows.push(row);
    }

    pub fn with_counts(mut self, n_accepted: u64, n_proposed: u64) -> Self {
        self.n_accepted = Some(n_accepted);
        self.n_proposed = Some(n_proposed);
        self
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::csv).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(k, v)| (k.to_string(), v.json()))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        Value::Array(rows)
    }
}

/// Everything a subcommand produces.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub tables: Vec<Table>,
    pub summary: Value,
}

/// Identity of a run, repeated in every sidecar and the manifest.
#[derive(Debug, Clone)]
pub struct RunInfo {
    pub subcommand: String,
    pub config_hash: String,
    pub seed: u64,
    pub wall_time: f64,
}

/// Writes the report into `dir`: tables, one `.meta.json` sidecar per table,
/// `summary.json`, and finally `manifest.json`. On failure every file this
/// call created is removed along with the in-progress marker. Returns the
/// manifest.
pub fn write_outputs(
    dir: &Path,
    report: &Report,
    format: Format,
    info: &RunInfo,
) -> Result<Value, CliError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let marker = dir.join(IN_PROGRESS_MARKER);
    fs::write(&marker, b"").map_err(|e| io_error(&marker, e))?;
    let mut written = Vec::new();
    let result = write_all(dir, report, format, info, &mut written);
    if result.is_err() {
        for path in &written {
            let _ = fs::remove_file(path);
        }
    }
    let _ = fs::remove_file(&marker);
    result
}

fn write_all(
    dir: &Path,
    report: &Report,
    format: Format,
    info: &RunInfo,
    written: &mut Vec<PathBuf>,
) -> Result<Value, CliError> {
    let mut artifacts = Vec::new();
    for table in &report.tables {
        let (name, body) = match format {
            Format::Csv => (format!("{}.csv", table.name), table.to_csv().into_bytes()),
            Format::Json => (format!("{}.json", table.name), pretty(&table.to_json())),
        };
        put(dir, name, &body, written, &mut artifacts)?;
        let sidecar = json!({
            "config_hash": info.config_hash,
            "seed": info.seed,
            "n_accepted": table.n_accepted,
            "n_proposed": table.n_proposed,
            "wall_time": info.wall_time,
        });
        put(
            dir,
            format!("{}.meta.json", table.name),
            &pretty(&sidecar),
            written,
            &mut artifacts,
        )?;
    }
    put(
        dir,
        "summary.json".into(),
        &pretty(&report.summary),
        written,
        &mut artifacts,
    )?;
    let manifest = json!({
        "toolkit_version": env!("CARGO_PKG_VERSION"),
        "subcommand": info.subcommand,
        "config_hash": info.config_hash,
        "seed": info.seed,
        "artifacts": artifacts,
    });
    put(
        dir,
        MANIFEST.into(),
        &pretty(&manifest),
        written,
        &mut Vec::new(),
    )?;
    Ok(manifest)
}

fn put(
    dir: &Path,
    name: String,
    bytes: &[u8],
    written: &mut Vec<PathBuf>,
    artifacts: &mut Vec<String>,
) -> Result<(), CliError> {
    let path = dir.join(&name);
    written.push(path.clone());
    fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
    artifacts.push(name);
    Ok(())
}

fn pretty(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s.into_bytes()
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}
