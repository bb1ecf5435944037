use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, TableFormat};
use super::Preset;
use crate::error::{Error, Result};

/// One CSV cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            // Shortest representation that parses back to the same value.
            Cell::Float(v) => write!(f, "{v:?}"),
            Cell::Text(v) => f.write_str(v),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// A named table with a fixed column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
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
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width does not match table {}",
            self.name
        );
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let ser = |e: csv::Error| Error::Serialization(e.to_string());
        w.write_record(&self.columns).map_err(ser)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.to_string())).map_err(ser)?;
        }
        w.into_inner()
            .map_err(|e| Error::Serialization(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub name: String,
    pub files: Vec<String>,
    pub columns: Vec<String>,
    pub rows: usize,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub preset: Preset,
    pub master_seed: u64,
    pub config: ExperimentConfig,
    /// Seconds since the Unix epoch.
    pub started_unix: u64,
    pub finished_unix: u64,
    pub tables: Vec<TableEntry>,
}

impl Manifest {
    pub fn new(preset: Preset, config: &ExperimentConfig) -> Self {
        Self {
            tool: "photloc".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            preset,
            master_seed: config.disorder.master_seed,
            config: config.clone(),
            started_unix: unix_now(),
            finished_unix: 0,
            tables: Vec::new(),
        }
    }
}

pub(crate) fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultSet {
    pub manifest: Manifest,
    pub tables: Vec<Table>,
}

impl ResultSet {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::Serialization(format!("{}: {e}", path.display())))?;
    manifest.config.validate()?;
    Ok(manifest)
}

/// Writes every table in the configured formats and `manifest.json` into
/// `directory`. Files are written under temporary names and renamed; on
/// failure every file written by this call is removed.
pub fn emit(results: &ResultSet, directory: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = directory.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written: Vec<PathBuf> = Vec::new();
    let outcome = write_all(results, dir, &mut written);
    if outcome.is_err() {
        for path in &written {
            let _ = fs::remove_file(path);
        }
    }
    outcome.map(|_| written)
}

fn write_all(results: &ResultSet, dir: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let mut manifest = results.manifest.clone();
    manifest.tables.clear();
    for table in &results.tables {
        let mut files = Vec::new();
        for format in &results.manifest.config.output.formats {
            let (file, bytes) = match format {
                TableFormat::Csv => (format!("{}.csv", table.name), table.to_csv()?),
                TableFormat::Json => (
                    format!("{}.json", table.name),
                    serde_json::to_vec_pretty(table).map_err(|e| Error::Serialization(e.to_string()))?,
                ),
            };
            write_atomic(&dir.join(&file), &bytes, written)?;
            files.push(file);
        }
        manifest.tables.push(TableEntry {
            name: table.name.clone(),
            files,
            columns: table.columns.clone(),
            rows: table.rows.len(),
        });
    }
    manifest.finished_unix = unix_now();
    let bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Serialization(e.to_string()))?;
    write_atomic(&dir.join("manifest.json"), &bytes, written)
}

fn write_atomic(path: &Path, bytes: &[u8], written: &mut Vec<PathBuf>) -> Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("output");
    let tmp = path.with_file_name(format!(".{name}.partial"));
    written.push(tmp.clone());
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(file);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    written.pop();
    written.push(path.to_path_buf());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ResultSet {
        let config = ExperimentConfig::default();
        let mut t = Table::new("demo", &["preset", "n", "value"]);
        t.push(vec!["fig1".into(), 3usize.into(), 0.1f64.into()]);
        t.push(vec!["fig1".into(), 4usize.into(), 1e-20f64.into()]);
        ResultSet {
            manifest: Manifest::new(Preset::Fig1, &config),
            tables: vec![t],
        }
    }

    #[test]
    fn csv_has_header_and_round_trip_floats() {
        let text = String::from_utf8(sample().tables[0].to_csv().unwrap()).unwrap();
        assert_eq!(text, "preset,n,value\nfig1,3,0.1\nfig1,4,1e-20\n");
    }

    #[test]
    fn emit_writes_tables_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit(&sample(), dir.path()).unwrap();
        assert_eq!(files.len(), 2);
        let manifest = load_manifest(dir.path().join("manifest.json")).unwrap();
        assert_eq!(manifest.tables[0].files, vec!["demo.csv".to_string()]);
        assert_eq!(manifest.config, ExperimentConfig::default());
        let leftovers: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().ends_with(".partial"))
            .collect();
        assert!(leftovers.is_empty());
    }

    #[test]
    fn empty_result_set_writes_manifest_only() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = sample();
        r.tables.clear();
        let files = emit(&r, dir.path()).unwrap();
        assert_eq!(files, vec![dir.path().join("manifest.json")]);
    }

    #[test]
    fn unwritable_directory_fails_cleanly() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, b"x").unwrap();
        assert!(emit(&sample(), blocker.join("sub")).is_err());
        // A directory named like the manifest makes the final rename fail.
        let target = dir.path().join("out");
        fs::create_dir_all(target.join("manifest.json")).unwrap();
        assert!(emit(&sample(), &target).is_err());
        assert!(!target.join("demo.csv").exists());
        assert!(!target.join(".demo.csv.partial").exists());
    }
}
