use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::Serialize;

use crate::error::CliError;

/// Timestamps and invocation details, kept apart from results so that result
/// files compare byte for byte across runs.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub command: String,
    pub version: &'static str,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub config_file: Option<PathBuf>,
}

/// Writer for one output directory.
pub struct Output {
    dir: PathBuf,
}

impl Output {
    pub fn create(dir: impl Into<PathBuf>) -> Result<Self, CliError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(Output { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn text(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    /// Pretty JSON with a trailing newline.
    pub fn json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::io(self.path(name), e))?;
        s.push('\n');
        self.text(name, &s)
    }

    pub fn csv<R: Serialize>(&self, name: &str, rows: impl IntoIterator<Item = R>) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let err = |e: csv::Error| CliError::io(&path, e);
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::io(&path, e.error()))?;
        self.text(name, &String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// CSV with an explicit header, for tables whose columns vary.
    pub fn csv_table(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let err = |e: csv::Error| CliError::io(&path, e);
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(err)?;
        for r in rows {
            w.write_record(r).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::io(&path, e.error()))?;
        self.text(name, &String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn metadata(&self, stem: &str, meta: &Metadata) -> Result<PathBuf, CliError> {
        self.json(&format!("{stem}.meta.json"), meta)
    }
}
