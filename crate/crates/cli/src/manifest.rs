//! Run manifests and the output-directory writer that fills them in.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub args: Vec<String>,
    /// Configuration snapshot in TOML form.
    pub config: Option<String>,
    pub seed: u64,
    /// Input file path to SHA-256.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<OutputEntry>,
    pub wall_clock_s: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    }
}

/// Reads an input file and records its hash.
pub fn read_input(path: &Path, inputs: &mut BTreeMap<String, String>) -> Result<String> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    inputs.insert(path.display().to_string(), sha256_hex(text.as_bytes()));
    Ok(text)
}

pub struct RunDir {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    started: Instant,
}

impl RunDir {
    pub fn new(dir: &Path, subcommand: &str, args: Vec<String>, seed: u64) -> Self {
        Self {
            dir: dir.to_path_buf(),
            manifest: RunManifest {
                subcommand: subcommand.to_string(),
                args,
                config: None,
                seed,
                inputs: BTreeMap::new(),
                outputs: Vec::new(),
                wall_clock_s: 0.0,
            },
            started: Instant::now(),
        }
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        fs::create_dir_all(&self.dir).map_err(|e| io_err(&self.dir, e))?;
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| io_err(&path, e))?;
        self.manifest.outputs.retain(|o| o.file != name);
        self.manifest.outputs.push(OutputEntry {
            file: name.to_string(),
            sha256: sha256_hex(contents.as_bytes()),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value).expect("values serialize");
        self.write(name, &(text + "\n"))
    }

    pub fn finish(mut self) -> Result<RunManifest> {
        self.manifest.wall_clock_s = self.started.elapsed().as_secs_f64();
        fs::create_dir_all(&self.dir).map_err(|e| io_err(&self.dir, e))?;
        let path = self.dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
        Ok(self.manifest)
    }
}
