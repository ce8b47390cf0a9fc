//! Deterministic CSV/JSON writers. Every file is written to a temporary
//! name in the output directory and renamed into place.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Fixed numeric format: 17 significant digits.
pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let target = self.path(name);
        let tmp = self.path(&format!(".{name}.tmp"));
        fs::write(&tmp, bytes).map_err(|e| CliError::Io(format!("cannot write {}: {e}", tmp.display())))?;
        fs::rename(&tmp, &target)
            .map_err(|e| CliError::Io(format!("cannot rename to {}: {e}", target.display())))?;
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
        Ok(())
    }

    /// Numeric table with one column per header.
    pub fn csv(&mut self, name: &str, headers: &[&str], columns: &[&[f64]]) -> Result<(), CliError> {
        let rows = columns.first().map_or(0, |c| c.len());
        if columns.len() != headers.len() || columns.iter().any(|c| c.len() != rows) {
            return Err(CliError::Io(format!("{name}: ragged table")));
        }
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let fail = |e: csv::Error| CliError::Io(format!("{name}: {e}"));
        w.write_record(headers).map_err(fail)?;
        for i in 0..rows {
            w.write_record(columns.iter().map(|c| format_number(c[i]))).map_err(fail)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(format!("{name}: {e}")))?;
        self.put(name, &bytes)
    }

    /// Table whose cells are already strings (mixed text and numbers).
    pub fn csv_text(&mut self, name: &str, headers: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let fail = |e: csv::Error| CliError::Io(format!("{name}: {e}"));
        w.write_record(headers).map_err(fail)?;
        for row in rows {
            w.write_record(row).map_err(fail)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(format!("{name}: {e}")))?;
        self.put(name, &bytes)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(format!("{name}: {e}")))?;
        text.push('\n');
        self.put(name, text.as_bytes())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub subcommand: String,
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub wall_time_seconds: f64,
    pub exit_code: i32,
}

/// Reads the named columns of a numeric CSV file.
pub fn read_columns(path: &Path, names: &[&str]) -> Result<Vec<Vec<f64>>, CliError> {
    let fail = |e: String| CliError::Config(format!("{}: {e}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| fail(e.to_string()))?;
    let headers = reader.headers().map_err(|e| fail(e.to_string()))?.clone();
    let index: Vec<usize> = names
        .iter()
        .map(|n| {
            headers
                .iter()
                .position(|h| h.trim() == *n)
                .ok_or_else(|| fail(format!("no column '{n}'")))
        })
        .collect::<Result<_, _>>()?;
    let mut out = vec![Vec::new(); names.len()];
    for record in reader.records() {
        let record = record.map_err(|e| fail(e.to_string()))?;
        for (col, &i) in out.iter_mut().zip(&index) {
            let cell = record.get(i).unwrap_or("");
            col.push(cell.trim().parse().map_err(|_| fail(format!("bad number '{cell}'")))?);
        }
    }
    Ok(out)
}
