//! Run manifests: one `manifest.json` per command invocation, recording the
//! command, a stable digest of its resolved configuration, seeds, tool
//! version, wall-clock bounds, and input/output paths.

use crate::dataset::{write_json, DatasetError};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 hex of the resolved-config JSON.
    pub config_digest: String,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

pub fn now_unix_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

/// Stable hash of a resolved config value: serialize (struct field order is
/// fixed) and SHA-256 the bytes.
pub fn config_digest<T: Serialize>(config: &T) -> String {
    let json = serde_json::to_string(config).unwrap_or_default();
    let digest = Sha256::digest(json.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    pub fn new<T: Serialize>(command: &str, config: &T, seed: Option<u64>) -> Self {
        RunManifest {
            command: command.to_string(),
            config_digest: config_digest(config),
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix_ms: now_unix_ms(),
            finished_unix_ms: 0,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(mut self, path: &Path) -> Self {
        self.inputs.push(path.display().to_string());
        self
    }

    pub fn output(mut self, path: &Path) -> Self {
        self.outputs.push(path.display().to_string());
        self
    }

    /// Stamp the finish time and write `manifest.json` into `dir`.
    pub fn finish(mut self, dir: &Path) -> Result<(), DatasetError> {
        self.finished_unix_ms = now_unix_ms();
        write_json(&dir.join("manifest.json"), &self)
    }
}
