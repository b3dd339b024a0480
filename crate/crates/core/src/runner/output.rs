//! Output tables and provenance.
//!
//! CSV files start with two `#` lines carrying the config hash and library version, then a
//! header row; floats are written with 17 significant digits. Nothing time- or
//! machine-dependent is written, so reruns are byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn config_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    /// CSV tables plus a JSON metadata file.
    Csv,
    /// One JSON file holding the metadata and every table.
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    pub name: String,
    pub command: &'static str,
    pub model: &'static str,
    pub params: serde_json::Value,
    pub seed: Option<u64>,
    pub config_sha256: String,
    pub version: &'static str,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Num(x) => format!("{x:.16e}"),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Int(i) => serde_json::Value::from(*i),
            Cell::Num(x) => {
                serde_json::Number::from_f64(*x).map(serde_json::Value::Number).unwrap_or(serde_json::Value::Null)
            }
            Cell::Text(s) => serde_json::Value::from(s.clone()),
            Cell::Empty => serde_json::Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

/// A named table, written as `<name>_<command>_<suffix>.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub suffix: &'static str,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(suffix: &'static str, header: &[&str]) -> Self {
        Table { suffix, header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn with_header(suffix: &'static str, header: Vec<String>) -> Self {
        Table { suffix, header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width differs from the header");
        self.rows.push(row);
    }

    pub fn to_csv(&self, provenance: &Provenance) -> String {
        let mut out = String::new();
        let _ =
            writeln!(out, "# {} {} config_sha256={}", provenance.name, provenance.command, provenance.config_sha256);
        let _ = writeln!(out, "# krylov-cd {}", provenance.version);
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "header": self.header,
            "rows": self.rows.iter().map(|r| r.iter().map(Cell::json).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }
}

/// Everything one command produces.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub provenance: Provenance,
    pub metadata: serde_json::Value,
    pub tables: Vec<Table>,
}

impl Report {
    fn stem(&self) -> String {
        format!("{}_{}", self.provenance.name, self.provenance.command)
    }

    /// Writes the report under `dir` and returns the paths written.
    pub fn write(&self, dir: &Path, format: Format) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut meta = serde_json::json!({
            "provenance": self.provenance,
            "metadata": self.metadata,
        });
        match format {
            Format::Csv => {
                let mut files = Vec::new();
                for table in &self.tables {
                    let path = dir.join(format!("{}_{}.csv", self.stem(), table.suffix));
                    fs::write(&path, table.to_csv(&self.provenance))?;
                    files.push(path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default());
                    written.push(path);
                }
                meta["files"] = serde_json::Value::from(files);
            }
            Format::Json => {
                let tables: serde_json::Map<String, serde_json::Value> =
                    self.tables.iter().map(|t| (t.suffix.to_string(), t.to_json())).collect();
                meta["tables"] = serde_json::Value::Object(tables);
            }
        }
        let path = dir.join(format!("{}.json", self.stem()));
        let text = serde_json::to_string_pretty(&meta).map_err(|e| crate::CdError::Io(e.to_string()))?;
        fs::write(&path, text + "\n")?;
        written.push(path);
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn provenance() -> Provenance {
        Provenance {
            name: "t".into(),
            command: "lanczos",
            model: "stirap",
            params: serde_json::json!({}),
            seed: None,
            config_sha256: config_hash("x"),
            version: VERSION,
        }
    }

    #[test]
    fn floats_carry_seventeen_digits() {
        let mut t = Table::new("b", &["n", "b_n"]);
        t.push(vec![Cell::from(1usize), Cell::from(std::f64::consts::PI)]);
        let csv = t.to_csv(&provenance());
        let last = csv.lines().last().unwrap();
        assert_eq!(last, "1,3.1415926535897931e0");
        let parsed: f64 = last.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(parsed, std::f64::consts::PI);
        assert!(csv.starts_with("# t lanczos config_sha256="));
    }

    #[test]
    fn hash_is_sha256_hex() {
        assert_eq!(config_hash("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
