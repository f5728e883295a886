use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

/// Index of a run directory, read by the plotting scripts.
#[derive(Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    /// Everything needed to rerun the command.
    pub spec: Value,
    pub seeds: Vec<u64>,
    pub files: Vec<FileEntry>,
}

#[derive(Serialize)]
pub struct FileEntry {
    pub path: String,
    pub kind: String,
}

impl Manifest {
    pub fn new(command: &str, spec: impl Serialize, seeds: Vec<u64>) -> Result<Self> {
        Ok(Self {
            tool: "sptree",
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            spec: serde_json::to_value(spec)?,
            seeds,
            files: Vec::new(),
        })
    }

    pub fn add(&mut self, path: impl Into<String>, kind: &str) {
        self.files.push(FileEntry {
            path: path.into(),
            kind: kind.into(),
        });
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        sptree::io::write_json(&dir.join("manifest.json"), self).context("writing manifest.json")
    }
}

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}
