//! Output directory bookkeeping: content hashes and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub config_path: String,
    pub config_sha256: String,
    pub seed: u64,
    pub workers: usize,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub exit_code: u8,
    pub outcome: String,
    pub outputs: Vec<OutputRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// Latest run of each subcommand that wrote into this directory.
    pub runs: Vec<RunRecord>,
}

impl RunManifest {
    pub fn new() -> Self {
        Self { tool: "sigmacell".into(), version: env!("CARGO_PKG_VERSION").into(), runs: Vec::new() }
    }

    /// Loads the manifest in `dir`, or an empty one if it is missing or unreadable.
    pub fn load(dir: &Path) -> Self {
        fs::read(dir.join(MANIFEST_NAME))
            .ok()
            .and_then(|b| serde_json::from_slice::<RunManifest>(&b).ok())
            .unwrap_or_else(Self::new)
    }

    /// Replaces the previous run of the same command and drops references to
    /// files that `run` has rewritten, so each file has exactly one entry.
    pub fn record(&mut self, run: RunRecord) {
        self.runs.retain(|r| r.command != run.command);
        for r in &mut self.runs {
            r.outputs.retain(|o| !run.outputs.iter().any(|n| n.path == o.path));
        }
        self.runs.push(run);
        self.runs.sort_by(|a, b| a.command.cmp(&b.command));
        self.version = env!("CARGO_PKG_VERSION").into();
    }

    pub fn save(&self, dir: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        let path = dir.join(MANIFEST_NAME);
        fs::write(&path, text).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
    }
}

impl Default for RunManifest {
    fn default() -> Self {
        Self::new()
    }
}

/// The single writer for a run: every artifact goes through here.
#[derive(Debug)]
pub struct ArtifactWriter {
    dir: PathBuf,
    outputs: Vec<OutputRecord>,
}

impl ArtifactWriter {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
        Ok(Self { dir: dir.to_path_buf(), outputs: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
        self.outputs.retain(|o| o.path != name);
        self.outputs.push(OutputRecord { path: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
        Ok(())
    }

    pub fn finish(self) -> Vec<OutputRecord> {
        self.outputs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(command: &str, files: &[&str]) -> RunRecord {
        RunRecord {
            command: command.into(),
            config_path: "c.toml".into(),
            config_sha256: String::new(),
            seed: 0,
            workers: 1,
            started_unix: 0,
            finished_unix: 0,
            exit_code: 0,
            outcome: "ok".into(),
            outputs: files.iter().map(|f| OutputRecord { path: f.to_string(), sha256: String::new(), bytes: 0 }).collect(),
        }
    }

    #[test]
    fn each_file_listed_once() {
        let mut m = RunManifest::new();
        m.record(run("sigma", &["sigma_table.json", "solves.csv"]));
        m.record(run("polar", &["polar.svg"]));
        m.record(run("sigma", &["sigma_table.json", "solves.csv"]));
        assert_eq!(m.runs.len(), 2);
        m.record(run("gamma", &["solves.csv"]));
        let all: Vec<&str> = m.runs.iter().flat_map(|r| r.outputs.iter().map(|o| o.path.as_str())).collect();
        assert_eq!(all.iter().filter(|p| **p == "solves.csv").count(), 1);
        assert_eq!(all.len(), 3);
    }

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
