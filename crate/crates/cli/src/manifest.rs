//! Provenance record written last by every artifact-producing command.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::files::{sha256, MANIFEST};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Complete,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub status: Status,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<PathBuf>,
    /// Seconds since the Unix epoch.
    pub started_at: u64,
    pub finished_at: u64,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl RunManifest {
    /// Starts a manifest, digesting `inputs` before any output is written.
    pub fn begin(command: &str, config: &impl Serialize, seeds: Vec<u64>, inputs: &[&Path]) -> Result<Self> {
        let inputs = inputs
            .iter()
            .map(|p| {
                Ok(InputDigest {
                    path: p.to_path_buf(),
                    sha256: sha256(p)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            status: Status::Complete,
            config: serde_json::to_value(config)?,
            seeds,
            inputs,
            outputs: Vec::new(),
            started_at: now(),
            finished_at: 0,
        })
    }

    pub fn output(&mut self, path: impl Into<PathBuf>) {
        self.outputs.push(path.into());
    }

    /// Writes `manifest.json` into `dir` and returns its path.
    pub fn finish(mut self, dir: &Path) -> Result<PathBuf> {
        self.finished_at = now();
        let path = dir.join(MANIFEST);
        std::fs::write(&path, serde_json::to_string_pretty(&self)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    #[cfg(test)]
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}
