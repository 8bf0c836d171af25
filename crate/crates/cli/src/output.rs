//! Manifests, CSV tables and atomic writes.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::CliError;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_VAR: &str = "CPC_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub config: Value,
    pub seed: Option<u64>,
    pub duration_seconds: f64,
}

pub enum Cell {
    Float(f64),
    Int(u64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(x) => float(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<u64> for Cell {
    fn from(n: u64) -> Self {
        Cell::Int(n)
    }
}

impl From<u32> for Cell {
    fn from(n: u32) -> Self {
        Cell::Int(n.into())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

/// 17 significant digits, enough to round-trip any double.
pub fn float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Extra `# key: value` lines after the manifest.
    pub notes: Vec<(String, String)>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.push((key.to_string(), value.to_string()));
    }
}

/// What a subcommand produces: the JSON result and its CSV rendering.
pub struct Output {
    pub result: Value,
    pub table: Table,
    pub seed: Option<u64>,
}

pub fn render(manifest: &Manifest, output: &Output, format: Format) -> String {
    match format {
        Format::Json => {
            let doc = serde_json::json!({ "manifest": manifest, "result": output.result });
            let mut s = serde_json::to_string_pretty(&doc).expect("json values serialize");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut s = String::new();
            s.push_str(&format!("# tool: {} {}\n", manifest.tool, manifest.version));
            s.push_str(&format!("# subcommand: {}\n", manifest.subcommand));
            s.push_str(&format!("# config: {}\n", manifest.config));
            if let Some(seed) = manifest.seed {
                s.push_str(&format!("# seed: {seed}\n"));
            }
            s.push_str(&format!(
                "# duration_seconds: {}\n",
                manifest.duration_seconds
            ));
            for (k, v) in &output.table.notes {
                s.push_str(&format!("# {k}: {v}\n"));
            }
            let mut writer = csv::Writer::from_writer(Vec::new());
            writer
                .write_record(&output.table.header)
                .expect("writing to memory cannot fail");
            for row in &output.table.rows {
                writer
                    .write_record(row.iter().map(Cell::render))
                    .expect("writing to memory cannot fail");
            }
            let body = writer.into_inner().expect("writing to memory cannot fail");
            s.push_str(&String::from_utf8(body).expect("records are UTF-8"));
            s
        }
    }
}

/// Resolves the destination: the explicit path, else a file named after the
/// subcommand in the directory from [`OUTPUT_DIR_VAR`], else stdout (`None`).
pub fn destination(explicit: Option<&Path>, subcommand: &str, format: Format) -> Option<PathBuf> {
    if let Some(p) = explicit {
        return Some(p.to_path_buf());
    }
    std::env::var_os(OUTPUT_DIR_VAR)
        .filter(|d| !d.is_empty())
        .map(|d| PathBuf::from(d).join(format!("{subcommand}.{}", format.extension())))
}

/// Writes through a temporary file in the target directory, then renames it.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}
