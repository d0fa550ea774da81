//! Append-only run manifest: one JSON line per command invocation.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};
use vitd_core::featurizer::HASH_FUNCTION;

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArtifactHash {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub toolkit_version: String,
    pub config_path: PathBuf,
    pub config_sha256: String,
    pub seed: u64,
    pub hash_function: String,
    pub effective_config: ExperimentConfig,
    pub inputs: Vec<ArtifactHash>,
    pub outputs: Vec<ArtifactHash>,
    pub started_at: String,
    pub finished_at: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Tracks the files one command reads and writes.
#[derive(Debug)]
pub struct Run {
    manifest: RunManifest,
}

impl Run {
    pub fn start(command: &str, args: Vec<String>, config_path: &Path, config_bytes: &[u8], config: &ExperimentConfig) -> Self {
        Self {
            manifest: RunManifest {
                command: command.into(),
                args,
                toolkit_version: vitd_core::VERSION.into(),
                config_path: config_path.to_path_buf(),
                config_sha256: sha256_hex(config_bytes),
                seed: config.seed,
                hash_function: HASH_FUNCTION.into(),
                effective_config: config.clone(),
                inputs: Vec::new(),
                outputs: Vec::new(),
                started_at: now(),
                finished_at: String::new(),
            },
        }
    }

    /// Records an input file by content hash.
    pub fn input(&mut self, path: &Path) -> anyhow::Result<()> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.push_input(path, &bytes);
        Ok(())
    }

    pub fn push_input(&mut self, path: &Path, bytes: &[u8]) {
        let entry = ArtifactHash { path: path.to_path_buf(), sha256: sha256_hex(bytes) };
        if !self.manifest.inputs.contains(&entry) {
            self.manifest.inputs.push(entry);
        }
    }

    /// Writes an output file (creating parent directories) and records it.
    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.outputs.push(ArtifactHash { path: path.to_path_buf(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    pub fn outputs(&self) -> &[ArtifactHash] {
        &self.manifest.outputs
    }

    /// Appends the finished entry to `path`.
    pub fn finish(mut self, path: &Path) -> anyhow::Result<RunManifest> {
        self.manifest.finished_at = now();
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut line = serde_json::to_vec(&self.manifest)?;
        line.push(b'\n');
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .with_context(|| format!("opening {}", path.display()))?;
        file.write_all(&line)?;
        Ok(self.manifest)
    }
}
