use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use riskfuse::rng::fingerprint;

use crate::CliError;

pub const MANIFEST: &str = "manifest.json";

/// What a stage read and wrote. Inputs are keyed by a readable name (an
/// upstream stage or a file path), outputs by path relative to the stage
/// directory; values are content fingerprints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

pub fn file_hash(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Prerequisite(format!("cannot read {}: {e}", path.display())))?;
    Ok(fingerprint(&bytes))
}

/// Fingerprint of a manifest file, used to chain stages.
pub fn manifest_hash(dir: &Path) -> Result<String, CliError> {
    file_hash(&dir.join(MANIFEST))
}

impl Manifest {
    pub fn read(dir: &Path) -> Option<Manifest> {
        let text = std::fs::read_to_string(dir.join(MANIFEST)).ok()?;
        serde_json::from_str(&text).ok()
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(dir.join(MANIFEST), text + "\n").map_err(riskfuse::Error::from)?;
        Ok(())
    }

    /// Record every file under `dir` except the manifest itself.
    pub fn collect_outputs(dir: &Path) -> Result<BTreeMap<String, String>, CliError> {
        let mut out = BTreeMap::new();
        let mut stack: Vec<PathBuf> = vec![dir.to_path_buf()];
        while let Some(d) = stack.pop() {
            let entries = std::fs::read_dir(&d).map_err(riskfuse::Error::from)?;
            for entry in entries {
                let path = entry.map_err(riskfuse::Error::from)?.path();
                if path.is_dir() {
                    stack.push(path);
                } else if path.file_name().is_some_and(|n| n != MANIFEST) {
                    let rel = path.strip_prefix(dir).expect("under dir").to_string_lossy().replace('\\', "/");
                    out.insert(rel, file_hash(&path)?);
                }
            }
        }
        Ok(out)
    }

    /// Recorded outputs still match the files on disk.
    pub fn verify(&self, dir: &Path) -> Result<(), String> {
        for (rel, hash) in &self.outputs {
            match file_hash(&dir.join(rel)) {
                Ok(h) if &h == hash => {}
                Ok(_) => return Err(format!("{} changed after stage `{}` wrote it", rel, self.stage)),
                Err(_) => return Err(format!("{} from stage `{}` is missing", rel, self.stage)),
            }
        }
        Ok(())
    }
}
