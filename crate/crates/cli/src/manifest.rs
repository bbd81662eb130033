//! `manifest.json`: what a command read, what it wrote, and with which settings.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::Result;
use crate::io::{sha256_file, write_json};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// What the file is to the command, e.g. `checkpoint` or `reference`.
    pub role: String,
    /// File name; inputs drop their directories, outputs are relative to the
    /// output directory.
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub config: Option<RunConfig>,
    pub parameters: BTreeMap<String, String>,
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed: None,
            config: None,
            parameters: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn with_config(mut self, config: &RunConfig, seed: u64) -> Self {
        self.config = Some(config.clone());
        self.seed = Some(seed);
        self
    }

    pub fn param(&mut self, key: &str, value: impl ToString) {
        self.parameters.insert(key.to_string(), value.to_string());
    }

    fn entry(role: &str, path: &Path) -> Result<FileEntry> {
        let name = path
            .file_name()
            .map_or_else(String::new, |n| n.to_string_lossy().into_owned());
        Ok(FileEntry {
            role: role.to_string(),
            name,
            sha256: sha256_file(path)?,
        })
    }

    pub fn input(&mut self, role: &str, path: &Path) -> Result<()> {
        self.inputs.push(Self::entry(role, path)?);
        Ok(())
    }

    /// Hashes `dir/name` and records it under `name`, which may contain
    /// subdirectories.
    pub fn output(&mut self, dir: &Path, name: &str) -> Result<()> {
        self.outputs.push(FileEntry {
            role: "output".to_string(),
            name: name.to_string(),
            sha256: sha256_file(&dir.join(name))?,
        });
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(MANIFEST_FILE), self)
    }
}
