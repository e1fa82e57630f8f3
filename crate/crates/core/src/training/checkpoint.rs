//! Binary checkpoint container: `HVF1`, a little-endian `u64` header
//! length, a JSON header, then every tensor as raw little-endian `f64`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};
use crate::numerics::{ParamSet, Tensor};
use crate::pipeline::{ScalerSpec, FEATURE_LAYOUT_VERSION};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"HVF1";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub best_epoch: usize,
    pub best_val_loss: Option<f64>,
    pub epochs_run: usize,
    pub stop_reason: String,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model_config: ModelConfig,
    pub params: ParamSet,
    pub scaler: ScalerSpec,
    pub feature_layout_version: u32,
    pub seed: u64,
    pub training: TrainingMetadata,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    feature_layout_version: u32,
    seed: u64,
    model: ModelConfig,
    scaler: ScalerSpec,
    training: TrainingMetadata,
    tensors: Vec<TensorEntry>,
    payload_bytes: usize,
    payload_sha256: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Checkpoint {
    pub fn from_model(model: &Model, scaler: &ScalerSpec, seed: u64, training: TrainingMetadata) -> Self {
        Self {
            model_config: model.config.clone(),
            params: model.params.clone(),
            scaler: scaler.clone(),
            feature_layout_version: FEATURE_LAYOUT_VERSION,
            seed,
            training,
        }
    }

    pub fn model(&self) -> Result<Model> {
        Model::from_params(self.model_config.clone(), self.params.clone())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut payload = Vec::with_capacity(self.params.scalar_count() * 8);
        let mut tensors = Vec::with_capacity(self.params.len());
        for p in self.params.iter() {
            tensors.push(TensorEntry { name: p.name.clone(), shape: p.value.shape().to_vec(), offset: payload.len() });
            for v in p.value.data() {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        let header = Header {
            format_version: CHECKPOINT_VERSION,
            feature_layout_version: self.feature_layout_version,
            seed: self.seed,
            model: self.model_config.clone(),
            scaler: self.scaler.clone(),
            training: self.training.clone(),
            tensors,
            payload_bytes: payload.len(),
            payload_sha256: sha256_hex(&payload),
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(format!("header encoding: {e}")))?;
        let mut out = Vec::with_capacity(12 + json.len() + payload.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&payload);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: String| Error::Checkpoint(msg);
        if bytes.len() < 12 {
            return Err(bad(format!("file is {} bytes, shorter than the fixed preamble", bytes.len())));
        }
        if &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(bad("missing HVF1 magic bytes".into()));
        }
        let header_len = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")) as usize;
        let rest = &bytes[12..];
        if header_len > rest.len() {
            return Err(bad(format!("header length {header_len} exceeds remaining {} bytes", rest.len())));
        }
        let header: Header =
            serde_json::from_slice(&rest[..header_len]).map_err(|e| bad(format!("malformed header: {e}")))?;
        if header.format_version != CHECKPOINT_VERSION {
            return Err(bad(format!(
                "unsupported format version {} (this build reads {CHECKPOINT_VERSION})",
                header.format_version
            )));
        }
        if header.feature_layout_version != FEATURE_LAYOUT_VERSION {
            return Err(bad(format!(
                "feature layout version {} does not match {FEATURE_LAYOUT_VERSION}",
                header.feature_layout_version
            )));
        }
        let payload = &rest[header_len..];
        if payload.len() != header.payload_bytes {
            return Err(bad(format!("payload is {} bytes, header declares {}", payload.len(), header.payload_bytes)));
        }
        if sha256_hex(payload) != header.payload_sha256 {
            return Err(bad("payload checksum mismatch".into()));
        }
        let mut params = ParamSet::new();
        for t in &header.tensors {
            let n: usize = t.shape.iter().product();
            let end = t.offset.checked_add(n * 8).filter(|&e| e <= payload.len());
            let end = end.ok_or_else(|| bad(format!("tensor `{}` runs past the payload", t.name)))?;
            let data =
                payload[t.offset..end].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            params
                .add(t.name.clone(), Tensor::new(&t.shape, data)?)
                .map_err(|e| bad(format!("tensor `{}`: {e}", t.name)))?;
        }
        header.model.validate()?;
        header.scaler.validate()?;
        Ok(Self {
            model_config: header.model,
            params,
            scaler: header.scaler,
            feature_layout_version: header.feature_layout_version,
            seed: header.seed,
            training: header.training,
        })
    }
}

fn temp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Writes `bytes` beside `path` and renames it into place.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = temp_path(path);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    write_atomic(path, &ckpt.to_bytes()?)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes).map_err(|e| match e {
        Error::Checkpoint(msg) => Error::Checkpoint(format!("{}: {msg}", path.display())),
        other => other,
    })
}
