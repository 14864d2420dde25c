use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineError;

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String, PipelineError> {
    let bytes = std::fs::read(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(sha256_hex(&bytes))
}

/// One completed stage: what it read, what it wrote, and under which settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub config_hash: String,
    pub seed: u64,
    /// Input file name (or path, for files outside the output directory) to sha256.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stages: BTreeMap<String, StageRecord>,
}

impl Manifest {
    /// Reads `manifest.json` from `dir`; a missing file is an empty manifest.
    pub fn load(dir: &Path) -> Result<Self, PipelineError> {
        let path = dir.join(MANIFEST_FILE);
        match std::fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| PipelineError::Json {
                path,
                message: e.to_string(),
            }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(source) => Err(PipelineError::Io { path, source }),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<(), PipelineError> {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(|source| PipelineError::Io { path, source })
    }

    /// True when `stage` last ran with these inputs and config and its
    /// outputs are still on disk unchanged.
    pub fn is_current(
        &self,
        stage: &str,
        config_hash: &str,
        inputs: &BTreeMap<String, String>,
        dir: &Path,
    ) -> bool {
        let Some(record) = self.stages.get(stage) else {
            return false;
        };
        if record.config_hash != config_hash || &record.inputs != inputs {
            return false;
        }
        record
            .outputs
            .iter()
            .all(|(name, hash)| hash_file(&dir.join(name)).is_ok_and(|h| &h == hash))
    }
}
