//! CSV tables and the JSON run report.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunReport<'a, R: Serialize> {
    pub command: &'a str,
    pub config: &'a std::collections::BTreeMap<String, toml::Value>,
    pub rows: &'a [R],
    pub verdicts: &'a [Verdict],
    pub duration_seconds: f64,
}

/// Output directory, created on first use.
pub struct OutDir(PathBuf);

impl OutDir {
    pub fn create(path: &Path) -> Result<Self> {
        fs::create_dir_all(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Self(path.to_path_buf()))
    }

    pub fn write_csv<R: Serialize>(&self, name: &str, rows: &[R]) -> Result<PathBuf> {
        let path = self.0.join(name);
        let mut w = csv::Writer::from_path(&path)?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(path)
    }

    pub fn write_report<R: Serialize>(
        &self,
        cfg: &ExperimentConfig,
        rows: &[R],
        verdicts: &[Verdict],
        duration_seconds: f64,
    ) -> Result<PathBuf> {
        let path = self.0.join(format!("{}.json", cfg.command.replace('-', "_")));
        let report = RunReport {
            command: &cfg.command,
            config: cfg.values(),
            rows,
            verdicts,
            duration_seconds,
        };
        let text = serde_json::to_string_pretty(&report)?;
        fs::write(&path, text + "\n").map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(path)
    }
}
