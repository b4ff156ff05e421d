//! Run manifests: every produced artifact is accompanied by a JSON record
//! of the command, configuration hash, seeds and input/output hashes, so a
//! run can be reproduced to byte identity. Timestamps live only here, never
//! in the artifacts themselves.

use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use emns_core::error::Result;
use emns_core::model_io::file_sha256;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub library_version: String,
    pub timestamp_unix: u64,
    /// SHA-256 of the resolved config file text (empty config hashes too).
    pub config_sha256: String,
    pub seeds: BTreeMap<String, u64>,
    /// Input path → SHA-256.
    pub inputs: BTreeMap<String, String>,
    /// Output path → SHA-256.
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_hex(text: &str) -> String {
    use emns_core::sha2::{Digest, Sha256};
    let digest = Sha256::digest(text.as_bytes());
    let mut hex = String::with_capacity(64);
    for b in digest {
        use std::fmt::Write;
        write!(hex, "{b:02x}").expect("string write");
    }
    hex
}

impl RunManifest {
    pub fn new(config_text: &str, seeds: BTreeMap<String, u64>) -> RunManifest {
        RunManifest {
            command: std::env::args().collect(),
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            config_sha256: sha256_hex(config_text),
            seeds,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs
            .insert(path.display().to_string(), file_sha256(path)?);
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path) -> Result<()> {
        self.outputs
            .insert(path.display().to_string(), file_sha256(path)?);
        Ok(())
    }

    /// Write alongside the primary artifact as `<artifact>.manifest.json`.
    pub fn write_for(&self, artifact: &Path) -> Result<()> {
        let path = manifest_path(artifact);
        let mut text = serde_json::to_string_pretty(self).map_err(emns_core::Error::from)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| emns_core::Error::io(&path, e))
    }
}

pub fn manifest_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    artifact.with_file_name(name)
}
