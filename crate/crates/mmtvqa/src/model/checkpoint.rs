//! Checkpoints: a JSON manifest (tensor names, shapes, dtype, config echo)
//! plus a flat little-endian f32 blob in manifest order. Round trips are
//! bit-exact on the stored f32 values.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::config::ModelConfig;
use crate::model::params::ParamStore;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const BLOB_FILE: &str = "params.bin";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TensorInfo {
    pub name: String,
    pub shape: [usize; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub format: String,
    pub dtype: String,
    pub config: ModelConfig,
    pub tensors: Vec<TensorInfo>,
}

impl Manifest {
    fn for_store(config: &ModelConfig, params: &ParamStore) -> Manifest {
        Manifest {
            format: "mmtvqa-checkpoint-v1".into(),
            dtype: "f32".into(),
            config: config.clone(),
            tensors: params
                .iter()
                .map(|(name, t)| TensorInfo { name: name.into(), shape: [t.nrows(), t.ncols()] })
                .collect(),
        }
    }
}

/// Write `manifest.json` and `params.bin` into `dir` (created if needed).
pub fn save_checkpoint(dir: &Path, config: &ModelConfig, params: &ParamStore) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let manifest = Manifest::for_store(config, params);
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&manifest_path, text)
        .map_err(|e| Error::io(manifest_path.display().to_string(), e))?;

    let blob_path = dir.join(BLOB_FILE);
    let mut blob = std::io::BufWriter::new(
        std::fs::File::create(&blob_path)
            .map_err(|e| Error::io(blob_path.display().to_string(), e))?,
    );
    for (_, tensor) in params.iter() {
        for &x in tensor.iter() {
            blob.write_all(&(x as f32).to_le_bytes())
                .map_err(|e| Error::io(blob_path.display().to_string(), e))?;
        }
    }
    blob.flush().map_err(|e| Error::io(blob_path.display().to_string(), e))?;
    Ok(())
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text =
        std::fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if manifest.dtype != "f32" {
        return Err(Error::Incompatible(format!("unsupported dtype {:?}", manifest.dtype)));
    }
    Ok(manifest)
}

/// Read a checkpoint back into a config and parameter store.
pub fn load_checkpoint(dir: &Path) -> Result<(ModelConfig, ParamStore)> {
    let manifest = load_manifest(dir)?;
    let blob_path = dir.join(BLOB_FILE);
    let mut bytes = Vec::new();
    std::fs::File::open(&blob_path)
        .map_err(|e| Error::io(blob_path.display().to_string(), e))?
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(blob_path.display().to_string(), e))?;

    let expected: usize = manifest.tensors.iter().map(|t| t.shape[0] * t.shape[1] * 4).sum();
    if bytes.len() != expected {
        return Err(Error::Size {
            path: blob_path.display().to_string(),
            expected: expected as u64,
            actual: bytes.len() as u64,
        });
    }

    let mut store = ParamStore::empty();
    let mut offset = 0;
    for info in &manifest.tensors {
        let count = info.shape[0] * info.shape[1];
        let mut data = Vec::with_capacity(count);
        for chunk in bytes[offset..offset + count * 4].chunks_exact(4) {
            data.push(f32::from_le_bytes(chunk.try_into().unwrap()) as f64);
        }
        offset += count * 4;
        let tensor = Array2::from_shape_vec((info.shape[0], info.shape[1]), data)
            .expect("shape matches data length");
        store.insert(info.name.clone(), tensor);
    }
    Ok((manifest.config, store))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::init_params;

    #[test]
    fn roundtrip_preserves_names_shapes_and_f32_bits() {
        let config = ModelConfig::tiny();
        let params = init_params(&config);
        let dir = tempfile::tempdir().unwrap();
        let ckpt = dir.path().join("ckpt");
        save_checkpoint(&ckpt, &config, &params).unwrap();
        let (config2, params2) = load_checkpoint(&ckpt).unwrap();
        assert_eq!(config, config2);
        assert_eq!(
            params.names().collect::<Vec<_>>(),
            params2.names().collect::<Vec<_>>(),
            "manifest order preserved"
        );
        for (name, t) in params.iter() {
            let t2 = params2.get(name).unwrap();
            for (a, b) in t.iter().zip(t2.iter()) {
                assert_eq!(*a as f32, *b as f32, "{name} altered");
            }
        }
        // a second save must produce byte-identical files
        let ckpt2 = dir.path().join("ckpt2");
        save_checkpoint(&ckpt2, &config2, &params2).unwrap();
        assert_eq!(
            std::fs::read(ckpt.join(BLOB_FILE)).unwrap(),
            std::fs::read(ckpt2.join(BLOB_FILE)).unwrap()
        );
        assert_eq!(
            std::fs::read(ckpt.join(MANIFEST_FILE)).unwrap(),
            std::fs::read(ckpt2.join(MANIFEST_FILE)).unwrap()
        );
    }

    #[test]
    fn truncated_blob_is_size_error() {
        let config = ModelConfig::tiny();
        let params = init_params(&config);
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(dir.path(), &config, &params).unwrap();
        let blob = dir.path().join(BLOB_FILE);
        let bytes = std::fs::read(&blob).unwrap();
        std::fs::write(&blob, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(load_checkpoint(dir.path()), Err(Error::Size { .. })));
    }
}
