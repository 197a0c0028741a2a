use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.toml";

/// Everything needed to rerun a command and get byte-identical outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// SHA-256 over the dataset files, or `none` for commands without input.
    pub dataset_fingerprint: String,
    /// Extra command arguments that are not part of the config.
    #[serde(default)]
    pub arguments: Vec<String>,
    pub config: RunConfig,
}

impl RunManifest {
    pub fn write(&self) -> Result<(), CliError> {
        let text = toml::to_string(self).expect("manifest serializes");
        let path = self.output_dir.join(MANIFEST_FILE);
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of each file's name, length and contents, in the given order.
pub fn fingerprint(files: &[PathBuf]) -> Result<String, CliError> {
    let mut h = Sha256::new();
    for path in files {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        h.update(name.as_bytes());
        h.update([0]);
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex(&h.finalize()))
}
