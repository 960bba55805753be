//! `manifest.json`: the last file written into every output directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use llghom::{Error, Result};

pub const FILE_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputArtifact {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    /// sha256 of `config`.
    pub config_hash: String,
    /// Canonical config with all defaults filled in.
    pub config: String,
    /// Subcommand options that change results.
    pub arguments: Vec<(String, String)>,
    pub inputs: Vec<InputArtifact>,
    /// Output file names, relative to the manifest.
    pub outputs: Vec<String>,
    pub started: String,
    pub finished: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn new(subcommand: &str, config: String, arguments: Vec<(String, String)>, inputs: Vec<InputArtifact>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            config_hash: sha256_hex(config.as_bytes()),
            config,
            arguments,
            inputs,
            outputs: Vec::new(),
            started: now(),
            finished: String::new(),
        }
    }

    /// Content address of the run: config, subcommand, arguments and inputs.
    pub fn run_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.subcommand.as_bytes());
        h.update([0]);
        h.update(self.config.as_bytes());
        for (k, v) in &self.arguments {
            h.update(format!("\0{k}={v}").as_bytes());
        }
        for i in &self.inputs {
            h.update(format!("\0{}", i.sha256).as_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn default_dir(&self) -> PathBuf {
        PathBuf::from("runs").join(format!("{}-{}", self.subcommand, &self.run_hash()[..12]))
    }

    pub fn hash_matches(&self) -> bool {
        sha256_hex(self.config.as_bytes()) == self.config_hash
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(FILE_NAME);
        let text = std::fs::read_to_string(&path).map_err(|_| Error::MissingArtifact(path.display().to_string()))?;
        serde_json::from_str(&text).map_err(|e| Error::Container(format!("{}: {e}", path.display())))
    }

    /// Stamps the finish time and writes the manifest.
    pub fn finish(mut self, dir: &Path) -> Result<Self> {
        self.finished = now();
        let text = serde_json::to_string_pretty(&self).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(dir.join(FILE_NAME), text + "\n")?;
        Ok(self)
    }
}

pub fn input(path: &Path) -> Result<InputArtifact> {
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(path.display().to_string()),
        _ => Error::from(e),
    })?;
    Ok(InputArtifact { path: path.display().to_string(), sha256: sha256_hex(&bytes) })
}

/// Creates the output directory, refusing one that holds a different run.
pub fn prepare_dir(dir: &Path, manifest: &RunManifest) -> Result<()> {
    if dir.join(FILE_NAME).exists() {
        let old = RunManifest::read(dir)?;
        if !old.hash_matches() {
            return Err(Error::Container(format!("{}: config hash does not match its config", dir.display())));
        }
        if old.subcommand != manifest.subcommand || old.run_hash() != manifest.run_hash() {
            return Err(Error::Io(format!("{} already holds a different run", dir.display())));
        }
        std::fs::remove_file(dir.join(FILE_NAME))?;
    }
    std::fs::create_dir_all(dir)?;
    Ok(())
}
