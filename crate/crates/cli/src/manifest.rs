//! Run manifests: enough provenance to reproduce a run bit-exactly.
//!
//! The manifest itself carries a wall-clock duration, so it is written as
//! `run_manifest.json` and sits outside the byte-identical determinism
//! contract; every report CSV/JSON is tagged with the deterministic
//! `run_id` instead.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const RUN_MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub run_id: String,
    pub command: String,
    pub tool_version: String,
    pub seed: u64,
    pub panel_hash: String,
    /// Effective post-merge configuration.
    pub config: serde_json::Value,
    pub input_hashes: BTreeMap<String, String>,
    pub duration_ms: u128,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex(&Sha256::digest(data))
}

pub fn hash_file(path: &Path) -> std::io::Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

pub struct ManifestBuilder {
    command: String,
    seed: u64,
    panel_hash: String,
    config: serde_json::Value,
    input_hashes: BTreeMap<String, String>,
    started: std::time::Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str, seed: u64, panel_json: &str, config: serde_json::Value) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            seed,
            panel_hash: sha256_hex(panel_json.as_bytes()),
            config,
            input_hashes: BTreeMap::new(),
            started: std::time::Instant::now(),
        }
    }

    pub fn input(&mut self, path: &Path) -> std::io::Result<()> {
        self.input_hashes
            .insert(path.display().to_string(), hash_file(path)?);
        Ok(())
    }

    /// Deterministic run id: digest of everything that defines the run.
    pub fn run_id(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.command.as_bytes());
        hasher.update(self.seed.to_le_bytes());
        hasher.update(self.panel_hash.as_bytes());
        hasher.update(self.config.to_string().as_bytes());
        for (path, digest) in &self.input_hashes {
            hasher.update(path.as_bytes());
            hasher.update(digest.as_bytes());
        }
        hex(&hasher.finalize())[..12].to_string()
    }

    pub fn write(self, out_dir: &Path) -> std::io::Result<()> {
        let manifest = RunManifest {
            run_id: self.run_id(),
            command: self.command,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.seed,
            panel_hash: self.panel_hash,
            config: self.config,
            input_hashes: self.input_hashes,
            duration_ms: self.started.elapsed().as_millis(),
        };
        std::fs::create_dir_all(out_dir)?;
        std::fs::write(
            out_dir.join(RUN_MANIFEST_FILE),
            serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
        )
    }
}
