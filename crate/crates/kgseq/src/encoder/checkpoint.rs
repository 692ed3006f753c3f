//! Checkpoint serialization.
//!
//! Layout: a little-endian `u32` manifest length, the JSON manifest, then raw
//! little-endian `f32` tensor data in manifest order. The manifest records
//! config, tensor names, shapes, and byte offsets (relative to the start of
//! the data section); loading re-derives the expected encoder tensor layout
//! from the config and rejects any disagreement.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::Matrix;

use super::{tensor_specs, EncoderConfig, EncoderParams, LayerParams};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt checkpoint manifest: {0}")]
    CorruptManifest(String),
    #[error("truncated checkpoint: {0}")]
    Truncated(String),
    #[error("checkpoint version {found} is not supported (expected {CHECKPOINT_VERSION})")]
    VersionMismatch { found: u32 },
    #[error("checkpoint integrity error: {0}")]
    Integrity(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: u64,
    pub byte_len: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub config: EncoderConfig,
    /// Task-level metadata (head kind, vocabulary, packing limits).
    #[serde(default)]
    pub extra: serde_json::Value,
    pub tensors: Vec<TensorRecord>,
}

/// A fully parsed checkpoint: encoder parameters plus whatever additional
/// tensors (task heads, embeddings) the writer appended.
#[derive(Debug)]
pub struct LoadedCheckpoint {
    pub params: EncoderParams<f32>,
    pub config: EncoderConfig,
    pub extra: serde_json::Value,
    pub extra_tensors: HashMap<String, Matrix<f32>>,
}

/// Saves encoder parameters alone.
pub fn save_checkpoint(
    params: &EncoderParams<f32>,
    cfg: &EncoderConfig,
    path: &Path,
) -> Result<(), CheckpointError> {
    save_with_extra(params, cfg, serde_json::Value::Null, &[], path)
}

/// Saves encoder parameters plus named extra tensors and a metadata blob.
/// The file is written to a temporary sibling and renamed into place, so a
/// crashed run never leaves a partial checkpoint at the target path.
pub fn save_with_extra(
    params: &EncoderParams<f32>,
    cfg: &EncoderConfig,
    extra: serde_json::Value,
    extra_tensors: &[(&str, &Matrix<f32>)],
    path: &Path,
) -> Result<(), CheckpointError> {
    let specs = tensor_specs(cfg);
    let slices = params.tensor_slices();
    debug_assert_eq!(specs.len(), slices.len());

    let mut tensors = Vec::with_capacity(specs.len() + extra_tensors.len());
    let mut offset = 0u64;
    let mut payload: Vec<&[f32]> = Vec::with_capacity(specs.len() + extra_tensors.len());
    for ((name, shape), slice) in specs.into_iter().zip(slices) {
        let byte_len = (slice.len() * 4) as u64;
        tensors.push(TensorRecord {
            name,
            shape,
            offset,
            byte_len,
        });
        offset += byte_len;
        payload.push(slice);
    }
    for (name, m) in extra_tensors {
        let byte_len = (m.data().len() * 4) as u64;
        tensors.push(TensorRecord {
            name: name.to_string(),
            shape: vec![m.rows(), m.cols()],
            offset,
            byte_len,
        });
        offset += byte_len;
        payload.push(m.data());
    }

    let manifest = Manifest {
        version: CHECKPOINT_VERSION,
        config: cfg.clone(),
        extra,
        tensors,
    };
    let manifest_bytes =
        serde_json::to_vec(&manifest).map_err(|e| CheckpointError::CorruptManifest(e.to_string()))?;
    write_container(path, &manifest_bytes, &payload)
}

fn write_container(path: &Path, manifest: &[u8], payload: &[&[f32]]) -> Result<(), CheckpointError> {
    let tmp = path.with_extension("tmp");
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(&(manifest.len() as u32).to_le_bytes())?;
        file.write_all(manifest)?;
        let mut buf = Vec::with_capacity(64 * 1024);
        for slice in payload {
            buf.clear();
            for v in *slice {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            file.write_all(&buf)?;
        }
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Manifest for standalone tensor files that reuse the container layout
/// without carrying an encoder (baseline embeddings, for instance).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RawManifest {
    pub version: u32,
    pub kind: String,
    #[serde(default)]
    pub meta: serde_json::Value,
    pub tensors: Vec<TensorRecord>,
}

/// Writes named matrices in the same length-prefixed-manifest + raw-f32
/// layout as encoder checkpoints.
pub fn save_named_tensors(
    path: &Path,
    kind: &str,
    meta: serde_json::Value,
    tensors: &[(&str, &Matrix<f32>)],
) -> Result<(), CheckpointError> {
    let mut records = Vec::with_capacity(tensors.len());
    let mut payload = Vec::with_capacity(tensors.len());
    let mut offset = 0u64;
    for (name, m) in tensors {
        let byte_len = (m.data().len() * 4) as u64;
        records.push(TensorRecord {
            name: name.to_string(),
            shape: vec![m.rows(), m.cols()],
            offset,
            byte_len,
        });
        offset += byte_len;
        payload.push(m.data());
    }
    let manifest = RawManifest {
        version: CHECKPOINT_VERSION,
        kind: kind.to_string(),
        meta,
        tensors: records,
    };
    let manifest_bytes =
        serde_json::to_vec(&manifest).map_err(|e| CheckpointError::CorruptManifest(e.to_string()))?;
    write_container(path, &manifest_bytes, &payload)
}

/// Counterpart of [`save_named_tensors`].
pub fn load_named_tensors(
    path: &Path,
) -> Result<(RawManifest, HashMap<String, Matrix<f32>>), CheckpointError> {
    let bytes = fs::read(path)?;
    if bytes.len() < 4 {
        return Err(CheckpointError::Truncated(
            "file shorter than the manifest length prefix".into(),
        ));
    }
    let manifest_len = u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as usize;
    let data_start = 4 + manifest_len;
    if bytes.len() < data_start {
        return Err(CheckpointError::Truncated("manifest is cut short".into()));
    }
    let manifest: RawManifest = serde_json::from_slice(&bytes[4..data_start])
        .map_err(|e| CheckpointError::CorruptManifest(e.to_string()))?;
    if manifest.version != CHECKPOINT_VERSION {
        return Err(CheckpointError::VersionMismatch {
            found: manifest.version,
        });
    }
    let data = &bytes[data_start..];
    let mut out = HashMap::new();
    for rec in &manifest.tensors {
        let expected = rec.shape.iter().product::<usize>() * 4;
        if rec.byte_len as usize != expected {
            return Err(CheckpointError::Integrity(format!(
                "tensor {} records {} bytes but its shape {:?} needs {expected}",
                rec.name, rec.byte_len, rec.shape
            )));
        }
        let lo = rec.offset as usize;
        let hi = lo + rec.byte_len as usize;
        if hi > data.len() {
            return Err(CheckpointError::Truncated(format!(
                "tensor {} extends past end of file",
                rec.name
            )));
        }
        if rec.shape.len() != 2 {
            return Err(CheckpointError::Integrity(format!(
                "tensor {} must be two-dimensional",
                rec.name
            )));
        }
        let values: Vec<f32> = data[lo..hi]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        out.insert(
            rec.name.clone(),
            Matrix::from_vec(rec.shape[0], rec.shape[1], values),
        );
    }
    Ok((manifest, out))
}

/// Loads encoder parameters and config, discarding extras.
pub fn load_checkpoint(path: &Path) -> Result<(EncoderParams<f32>, EncoderConfig), CheckpointError> {
    let loaded = load_full(path)?;
    Ok((loaded.params, loaded.config))
}

pub fn load_full(path: &Path) -> Result<LoadedCheckpoint, CheckpointError> {
    let bytes = fs::read(path)?;
    if bytes.len() < 4 {
        return Err(CheckpointError::Truncated(
            "file shorter than the manifest length prefix".into(),
        ));
    }
    let manifest_len = u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as usize;
    let data_start = 4 + manifest_len;
    if bytes.len() < data_start {
        return Err(CheckpointError::Truncated("manifest is cut short".into()));
    }
    let manifest: Manifest = serde_json::from_slice(&bytes[4..data_start])
        .map_err(|e| CheckpointError::CorruptManifest(e.to_string()))?;
    if manifest.version != CHECKPOINT_VERSION {
        return Err(CheckpointError::VersionMismatch {
            found: manifest.version,
        });
    }
    manifest
        .config
        .validate()
        .map_err(|e| CheckpointError::Integrity(format!("bad config: {e}")))?;

    let data = &bytes[data_start..];
    let read_tensor = |rec: &TensorRecord| -> Result<Vec<f32>, CheckpointError> {
        let expected = rec.shape.iter().product::<usize>() * 4;
        if rec.byte_len as usize != expected {
            return Err(CheckpointError::Integrity(format!(
                "tensor {} records {} bytes but its shape {:?} needs {expected}",
                rec.name, rec.byte_len, rec.shape
            )));
        }
        let lo = rec.offset as usize;
        let hi = lo + rec.byte_len as usize;
        if hi > data.len() {
            return Err(CheckpointError::Truncated(format!(
                "tensor {} extends past end of file",
                rec.name
            )));
        }
        Ok(data[lo..hi]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    };

    // The encoder tensors must match the layout derived from the config.
    let specs = tensor_specs(&manifest.config);
    if manifest.tensors.len() < specs.len() {
        return Err(CheckpointError::Integrity(format!(
            "manifest lists {} tensors, config requires {}",
            manifest.tensors.len(),
            specs.len()
        )));
    }
    let mut flat: Vec<Vec<f32>> = Vec::with_capacity(specs.len());
    for ((name, shape), rec) in specs.iter().zip(&manifest.tensors) {
        if &rec.name != name || &rec.shape != shape {
            return Err(CheckpointError::Integrity(format!(
                "expected tensor {name} with shape {shape:?}, manifest has {} {:?}",
                rec.name, rec.shape
            )));
        }
        flat.push(read_tensor(rec)?);
    }
    let expected_end = manifest
        .tensors
        .iter()
        .map(|r| r.offset + r.byte_len)
        .max()
        .unwrap_or(0) as usize;
    if data.len() != expected_end {
        return Err(CheckpointError::Integrity(format!(
            "data section is {} bytes, manifest accounts for {expected_end}",
            data.len()
        )));
    }

    let params = params_from_flat(&manifest.config, flat);

    let mut extra_tensors = HashMap::new();
    for rec in &manifest.tensors[specs.len()..] {
        let data = read_tensor(rec)?;
        if rec.shape.len() != 2 {
            return Err(CheckpointError::Integrity(format!(
                "extra tensor {} must be two-dimensional",
                rec.name
            )));
        }
        extra_tensors.insert(
            rec.name.clone(),
            Matrix::from_vec(rec.shape[0], rec.shape[1], data),
        );
    }

    Ok(LoadedCheckpoint {
        params,
        config: manifest.config,
        extra: manifest.extra,
        extra_tensors,
    })
}

fn params_from_flat(cfg: &EncoderConfig, mut flat: Vec<Vec<f32>>) -> EncoderParams<f32> {
    let h = cfg.hidden_size;
    let f = cfg.ffn_size;
    flat.reverse();
    let mut next = move || flat.pop().expect("tensor count checked against specs");
    let token_embed = Matrix::from_vec(cfg.vocab_size, h, next());
    let segment_embed = Matrix::from_vec(2, h, next());
    let position_embed = Matrix::from_vec(cfg.max_positions, h, next());
    let mut layers = Vec::with_capacity(cfg.num_layers);
    for _ in 0..cfg.num_layers {
        layers.push(LayerParams {
            wq: Matrix::from_vec(h, h, next()),
            bq: next(),
            wk: Matrix::from_vec(h, h, next()),
            bk: next(),
            wv: Matrix::from_vec(h, h, next()),
            bv: next(),
            wo: Matrix::from_vec(h, h, next()),
            bo: next(),
            ln1_scale: next(),
            ln1_offset: next(),
            w1: Matrix::from_vec(h, f, next()),
            b1: next(),
            w2: Matrix::from_vec(f, h, next()),
            b2: next(),
            ln2_scale: next(),
            ln2_offset: next(),
        });
    }
    EncoderParams {
        token_embed,
        segment_embed,
        position_embed,
        layers,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> EncoderConfig {
        EncoderConfig {
            num_layers: 2,
            num_heads: 2,
            hidden_size: 8,
            ffn_size: 16,
            max_positions: 16,
            vocab_size: 11,
            dropout_rate: 0.1,
            seed: 21,
        }
    }

    #[test]
    fn round_trip_is_bitwise_identical() {
        let c = cfg();
        let params = EncoderParams::<f32>::init(&c).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&params, &c, &path).unwrap();
        let (back, back_cfg) = load_checkpoint(&path).unwrap();
        assert_eq!(back_cfg, c);
        assert_eq!(back, params);
    }

    #[test]
    fn extra_tensors_round_trip() {
        let c = cfg();
        let params = EncoderParams::<f32>::init(&c).unwrap();
        let head = Matrix::from_fn(2, 8, |i, j| (i * 8 + j) as f32 * 0.5);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_with_extra(
            &params,
            &c,
            serde_json::json!({"task": "triple_classification"}),
            &[("head.weight", &head)],
            &path,
        )
        .unwrap();
        let loaded = load_full(&path).unwrap();
        assert_eq!(loaded.extra["task"], "triple_classification");
        assert_eq!(loaded.extra_tensors["head.weight"], head);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let c = cfg();
        let params = EncoderParams::<f32>::init(&c).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&params, &c, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let cut = path.with_extension("cut");
        std::fs::write(&cut, &bytes[..bytes.len() - 32]).unwrap();
        match load_checkpoint(&cut) {
            Err(CheckpointError::Truncated(_)) | Err(CheckpointError::Integrity(_)) => {}
            other => panic!("expected truncation/integrity error, got {other:?}"),
        }
    }

    #[test]
    fn edited_hidden_size_is_an_integrity_error() {
        let c = cfg();
        let params = EncoderParams::<f32>::init(&c).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&params, &c, &path).unwrap();

        // Rewrite the manifest with a different hidden_size but identical
        // tensor data.
        let bytes = std::fs::read(&path).unwrap();
        let mlen = u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as usize;
        let mut manifest: Manifest = serde_json::from_slice(&bytes[4..4 + mlen]).unwrap();
        manifest.config.hidden_size = 4;
        manifest.config.num_heads = 2;
        let new_manifest = serde_json::to_vec(&manifest).unwrap();
        let mut out = Vec::new();
        out.extend_from_slice(&(new_manifest.len() as u32).to_le_bytes());
        out.extend_from_slice(&new_manifest);
        out.extend_from_slice(&bytes[4 + mlen..]);
        let tampered = path.with_extension("bad");
        std::fs::write(&tampered, out).unwrap();
        assert!(matches!(
            load_checkpoint(&tampered),
            Err(CheckpointError::Integrity(_))
        ));
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let c = cfg();
        let params = EncoderParams::<f32>::init(&c).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&params, &c, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let mlen = u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as usize;
        let mut manifest: Manifest = serde_json::from_slice(&bytes[4..4 + mlen]).unwrap();
        manifest.version = 9;
        let new_manifest = serde_json::to_vec(&manifest).unwrap();
        let mut out = Vec::new();
        out.extend_from_slice(&(new_manifest.len() as u32).to_le_bytes());
        out.extend_from_slice(&new_manifest);
        out.extend_from_slice(&bytes[4 + mlen..]);
        std::fs::write(&path, out).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(CheckpointError::VersionMismatch { found: 9 })
        ));
    }

    #[test]
    fn garbage_manifest_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let mut out = Vec::new();
        out.extend_from_slice(&8u32.to_le_bytes());
        out.extend_from_slice(b"notjson!");
        std::fs::write(&path, out).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(CheckpointError::CorruptManifest(_))
        ));
    }
}
