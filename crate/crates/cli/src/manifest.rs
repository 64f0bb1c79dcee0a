use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use nrm_core::model::to_json;
use nrm_core::{AlgoConfig, Instance};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const BUILD_ID: &str = env!("NRM_BUILD_ID");

/// Record written next to every set of outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub instance: InstanceRef,
    pub config: Option<AlgoConfig>,
    pub outputs: Vec<PathBuf>,
    pub build: String,
    pub wall_s: f64,
    /// Command-specific results (bounds, stop reason, ...).
    pub summary: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRef {
    pub path: Option<PathBuf>,
    /// SHA-256 of the canonical instance JSON.
    pub hash: String,
    /// Generator arguments, for instances made by `gen`.
    pub spec: Option<serde_json::Value>,
}

impl InstanceRef {
    pub fn new(inst: &Instance, path: Option<&Path>) -> Self {
        InstanceRef { path: path.map(Path::to_path_buf), hash: instance_hash(inst), spec: None }
    }
}

pub fn instance_hash(inst: &Instance) -> String {
    let digest = Sha256::digest(to_json(inst).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }
}

/// Sidecar manifest path for a single output file: `out.json` -> `out.json.manifest.json`.
pub fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    path.with_file_name(name)
}
