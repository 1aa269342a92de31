//! Run manifests and output directories.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use thzsim::config::ScenarioSetup;

/// Written as `manifest.json` next to every run's outputs. Holds nothing
/// that varies between identical runs, so output directories can be
/// compared byte for byte.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub scenarios: Vec<String>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drops: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_path: Option<String>,
    /// SHA-256 of the fully resolved setups.
    pub config_hash: String,
    pub outputs: Vec<String>,
}

pub fn config_hash(setups: &[ScenarioSetup]) -> Result<String> {
    let json = serde_json::to_vec(setups)?;
    Ok(Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect())
}

/// Collects the files a command writes.
pub struct OutDir {
    pub dir: PathBuf,
    pub files: Vec<String>,
}

impl OutDir {
    pub fn create(dir: &Path) -> Result<OutDir> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(OutDir {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let p = self.dir.join(name);
        std::fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))?;
        self.files.push(name.to_string());
        Ok(p)
    }

    /// Write `manifest.json` listing every file written so far.
    pub fn finish(mut self, mut manifest: Manifest) -> Result<Vec<PathBuf>> {
        manifest.outputs = self.files.clone();
        let json = serde_json::to_string_pretty(&manifest)? + "\n";
        self.write("manifest.json", json)?;
        Ok(self.files.iter().map(|f| self.dir.join(f)).collect())
    }
}
