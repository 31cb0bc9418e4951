use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: [usize; 2],
    /// Byte offset into the blob.
    pub offset: usize,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    blob: String,
    tensors: Vec<TensorEntry>,
    config: serde_json::Value,
}

/// Named tensors plus a free-form JSON config block.
///
/// On disk: a JSON manifest listing each tensor's name, shape and byte offset,
/// next to a blob of little-endian `f64` values in row-major order. The blob
/// shares the manifest's file stem with a `.bin` extension.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: serde_json::Value,
    pub tensors: Vec<(String, Tensor)>,
}

fn blob_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("bin")
}

impl Checkpoint {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn write(&self, manifest_path: &Path) -> Result<()> {
        let blob = blob_path(manifest_path);
        let mut bytes = Vec::new();
        let mut entries = Vec::new();
        for (name, t) in &self.tensors {
            entries.push(TensorEntry { name: name.clone(), shape: [t.rows(), t.cols()], offset: bytes.len() });
            for v in t.data() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        let manifest = Manifest {
            blob: blob.file_name().and_then(|s| s.to_str()).unwrap_or_default().to_string(),
            tensors: entries,
            config: self.config.clone(),
        };
        std::fs::write(&blob, bytes)?;
        std::fs::write(manifest_path, serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn read(manifest_path: &Path) -> Result<Self> {
        let bad = |message: String| Error::Checkpoint { path: manifest_path.to_path_buf(), message };
        let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(manifest_path)?)
            .map_err(|e| bad(e.to_string()))?;
        let blob_file = manifest_path.with_file_name(&manifest.blob);
        let bytes = std::fs::read(&blob_file).map_err(|e| bad(format!("{}: {e}", blob_file.display())))?;
        let mut tensors = Vec::new();
        for e in manifest.tensors {
            let n = e.shape[0] * e.shape[1];
            let end = e.offset + 8 * n;
            if end > bytes.len() {
                return Err(bad(format!("tensor `{}` runs past the end of the blob", e.name)));
            }
            let data = bytes[e.offset..end]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            tensors.push((e.name, Tensor::new(e.shape[0], e.shape[1], data)?));
        }
        Ok(Checkpoint { config: manifest.config, tensors })
    }
}
