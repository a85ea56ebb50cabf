//! Versioned model checkpoints.
//!
//! A checkpoint is a JSON document: a header (format version, element type,
//! dims, optional class map, optimizer-state flag) and every tensor as
//! base64 of its little-endian IEEE-754 bytes. A SHA-256 over the header
//! fields and raw tensor bytes guards against truncation and tampering.

use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::optim::{AdamConfig, OptimizerKind, OptimizerState};
use super::params::{Dims, ModelParams, ParamTree, TENSOR_NAMES};
use crate::fsutil::write_atomic;
use crate::scalar::{Precision, Scalar};
use crate::window::ClassMap;

pub const FORMAT: &str = "harlstm-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint version {found} is not supported (this build reads version {supported})")]
    VersionMismatch { found: u64, supported: u32 },
    #[error("checkpoint integrity check failed: {0}")]
    CorruptChecksum(String),
    #[error("malformed checkpoint: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    shape: Vec<usize>,
    data: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct OptimizerHeader {
    kind: OptimizerKind,
    adam: AdamConfig,
    step: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Document {
    format: String,
    version: u32,
    dtype: Precision,
    dims: Dims,
    class_map: Option<ClassMap>,
    #[serde(default)]
    window_size: Option<usize>,
    optimizer_state: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    optimizer: Option<OptimizerHeader>,
    tensors: Vec<TensorRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    moment1: Vec<TensorRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    moment2: Vec<TensorRecord>,
    checksum: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<F> {
    pub params: ModelParams<F>,
    pub class_map: Option<ClassMap>,
    /// Sequence length the model was trained on, when known.
    pub window_size: Option<usize>,
    pub optimizer: Option<OptimizerState<F>>,
}

fn encode_tree<F: Scalar>(tree: &ParamTree<F>) -> Vec<TensorRecord> {
    tree.tensors()
        .iter()
        .map(|t| {
            let mut bytes = Vec::with_capacity(t.data.len() * F::BYTES);
            for v in t.data {
                v.write_le(&mut bytes);
            }
            TensorRecord {
                name: t.name.to_string(),
                shape: t.shape.clone(),
                data: B64.encode(bytes),
            }
        })
        .collect()
}

fn raw_bytes(records: &[TensorRecord]) -> Result<Vec<Vec<u8>>, CheckpointError> {
    records
        .iter()
        .map(|r| {
            B64.decode(&r.data)
                .map_err(|e| CheckpointError::CorruptChecksum(format!("tensor {}: {e}", r.name)))
        })
        .collect()
}

fn digest(doc: &Document, blocks: &[(&str, &[TensorRecord], &[Vec<u8>])]) -> String {
    let mut h = Sha256::new();
    let header = serde_json::json!({
        "format": doc.format,
        "version": doc.version,
        "dtype": doc.dtype,
        "dims": doc.dims,
        "class_map": doc.class_map,
        "window_size": doc.window_size,
        "optimizer_state": doc.optimizer_state,
        "optimizer": doc.optimizer,
    });
    h.update(header.to_string().as_bytes());
    for (group, records, raw) in blocks {
        for (r, bytes) in records.iter().zip(raw.iter()) {
            h.update(group.as_bytes());
            h.update(r.name.as_bytes());
            for d in &r.shape {
                h.update((*d as u64).to_le_bytes());
            }
            h.update(bytes);
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn decode_tree<F: Scalar>(
    dims: Dims,
    dtype: Precision,
    records: &[TensorRecord],
    raw: &[Vec<u8>],
) -> Result<ParamTree<F>, CheckpointError> {
    if records.len() != TENSOR_NAMES.len() {
        return Err(CheckpointError::Format(format!("expected {} tensors", TENSOR_NAMES.len())));
    }
    let width = match dtype {
        Precision::F32 => 4,
        Precision::F64 => 8,
    };
    let mut tree = ParamTree::<F>::zeros(dims);
    let shapes: Vec<Vec<usize>> = tree.tensors().iter().map(|t| t.shape.clone()).collect();
    for (((dst, rec), bytes), shape) in tree.tensors_mut().into_iter().zip(records).zip(raw).zip(shapes) {
        if rec.name != dst.name || rec.shape != shape {
            return Err(CheckpointError::Format(format!(
                "tensor {} {:?} where {} {:?} was expected",
                rec.name, rec.shape, dst.name, shape
            )));
        }
        if bytes.len() != dst.data.len() * width {
            return Err(CheckpointError::CorruptChecksum(format!("tensor {} has {} bytes", rec.name, bytes.len())));
        }
        for (slot, chunk) in dst.data.iter_mut().zip(bytes.chunks_exact(width)) {
            *slot = match dtype {
                Precision::F32 => F::of(f32::read_le(chunk) as f64),
                Precision::F64 => F::of(f64::read_le(chunk)),
            };
        }
    }
    Ok(tree)
}

impl<F: Scalar> Checkpoint<F> {
    pub fn new(params: ModelParams<F>) -> Self {
        Self {
            params,
            class_map: None,
            window_size: None,
            optimizer: None,
        }
    }

    pub fn with_class_map(mut self, class_map: ClassMap) -> Self {
        self.class_map = Some(class_map);
        self
    }

    pub fn with_window_size(mut self, window_size: usize) -> Self {
        self.window_size = Some(window_size);
        self
    }

    pub fn encode(&self) -> Vec<u8> {
        let tensors = encode_tree(&self.params);
        let (moment1, moment2, optimizer) = match &self.optimizer {
            Some(st) => (
                encode_tree(&st.m),
                encode_tree(&st.v),
                Some(OptimizerHeader {
                    kind: st.kind,
                    adam: st.adam,
                    step: st.step,
                }),
            ),
            None => (Vec::new(), Vec::new(), None),
        };
        let mut doc = Document {
            format: FORMAT.to_string(),
            version: VERSION,
            dtype: F::PRECISION,
            dims: self.params.dims(),
            class_map: self.class_map.clone(),
            window_size: self.window_size,
            optimizer_state: optimizer.is_some(),
            optimizer,
            tensors,
            moment1,
            moment2,
            checksum: String::new(),
        };
        let raw = |r: &[TensorRecord]| raw_bytes(r).expect("freshly encoded");
        let (r0, r1, r2) = (raw(&doc.tensors), raw(&doc.moment1), raw(&doc.moment2));
        doc.checksum = digest(
            &doc,
            &[
                ("params", &doc.tensors, &r0),
                ("m", &doc.moment1, &r1),
                ("v", &doc.moment2, &r2),
            ],
        );
        let mut out = serde_json::to_vec_pretty(&doc).expect("checkpoint serializes");
        out.push(b'\n');
        out
    }

    /// Reads a checkpoint of either element type, converting to `F`.
    /// Same-type round trips are bit-exact.
    pub fn decode(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let value: serde_json::Value = serde_json::from_slice(bytes)
            .map_err(|e| CheckpointError::CorruptChecksum(format!("unreadable document: {e}")))?;
        check_version(&value)?;
        let doc: Document = serde_json::from_value(value).map_err(|e| CheckpointError::Format(e.to_string()))?;
        if doc.format != FORMAT {
            return Err(CheckpointError::Format(format!("unknown format {:?}", doc.format)));
        }
        let (r0, r1, r2) = (raw_bytes(&doc.tensors)?, raw_bytes(&doc.moment1)?, raw_bytes(&doc.moment2)?);
        let want = digest(
            &doc,
            &[
                ("params", &doc.tensors, &r0),
                ("m", &doc.moment1, &r1),
                ("v", &doc.moment2, &r2),
            ],
        );
        if want != doc.checksum {
            return Err(CheckpointError::CorruptChecksum("checksum mismatch".into()));
        }
        doc.dims
            .validate()
            .map_err(|e| CheckpointError::Format(e.to_string()))?;
        let params = decode_tree(doc.dims, doc.dtype, &doc.tensors, &r0)?;
        let optimizer = match (&doc.optimizer, doc.optimizer_state) {
            (Some(h), true) => Some(OptimizerState {
                kind: h.kind,
                adam: h.adam,
                m: decode_tree(doc.dims, doc.dtype, &doc.moment1, &r1)?,
                v: decode_tree(doc.dims, doc.dtype, &doc.moment2, &r2)?,
                step: h.step,
            }),
            (None, false) => None,
            _ => return Err(CheckpointError::Format("optimizer flag disagrees with contents".into())),
        };
        Ok(Self {
            params,
            class_map: doc.class_map,
            window_size: doc.window_size,
            optimizer,
        })
    }
}

fn check_version(value: &serde_json::Value) -> Result<(), CheckpointError> {
    let found = value
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| CheckpointError::Format("missing version".into()))?;
    if found != VERSION as u64 {
        return Err(CheckpointError::VersionMismatch {
            found,
            supported: VERSION,
        });
    }
    Ok(())
}

/// Element type recorded in a checkpoint header.
pub fn checkpoint_precision(bytes: &[u8]) -> Result<Precision, CheckpointError> {
    let value: serde_json::Value = serde_json::from_slice(bytes)
        .map_err(|e| CheckpointError::CorruptChecksum(format!("unreadable document: {e}")))?;
    check_version(&value)?;
    serde_json::from_value(value.get("dtype").cloned().unwrap_or_default())
        .map_err(|e| CheckpointError::Format(format!("dtype: {e}")))
}

pub fn save_checkpoint<F: Scalar>(params: &ModelParams<F>, path: &Path) -> Result<(), CheckpointError> {
    write_atomic(path, &Checkpoint::new(params.clone()).encode())?;
    Ok(())
}

pub fn load_checkpoint<F: Scalar>(path: &Path) -> Result<ModelParams<F>, CheckpointError> {
    Ok(Checkpoint::<F>::decode(&std::fs::read(path)?)?.params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lstm::params::init_params;

    fn bits<F: Scalar>(p: &ModelParams<F>) -> Vec<u64> {
        p.tensors().iter().flat_map(|t| t.data.iter().map(|v| v.bits_u64())).collect()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let p = init_params::<f32>(3, Dims::new(3, 5, 2)).unwrap();
        let back = Checkpoint::<f32>::decode(&Checkpoint::new(p.clone()).encode()).unwrap();
        assert_eq!(bits(&back.params), bits(&p));

        let p64 = init_params::<f64>(3, Dims::new(3, 5, 4)).unwrap();
        let back = Checkpoint::<f64>::decode(&Checkpoint::new(p64.clone()).encode()).unwrap();
        assert_eq!(bits(&back.params), bits(&p64));
    }

    #[test]
    fn optimizer_state_survives() {
        let p = init_params::<f64>(1, Dims::new(3, 2, 2)).unwrap();
        let mut st = OptimizerState::new(OptimizerKind::Adam, &p);
        st.m = p.clone();
        st.step = 17;
        let ck = Checkpoint {
            params: p.clone(),
            class_map: Some(ClassMap::binary("eating")),
            window_size: Some(150),
            optimizer: Some(st),
        };
        assert_eq!(Checkpoint::<f64>::decode(&ck.encode()).unwrap(), ck);
    }

    #[test]
    fn truncation_is_detected() {
        let bytes = Checkpoint::new(init_params::<f32>(3, Dims::new(3, 4, 2)).unwrap()).encode();
        for cut in [bytes.len() / 3, bytes.len() - 10] {
            assert!(matches!(
                Checkpoint::<f32>::decode(&bytes[..cut]),
                Err(CheckpointError::CorruptChecksum(_))
            ));
        }
    }

    #[test]
    fn tampered_tensor_is_detected() {
        let p = init_params::<f32>(3, Dims::new(3, 4, 2)).unwrap();
        let text = String::from_utf8(Checkpoint::new(p).encode()).unwrap();
        let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        let t = &mut doc["tensors"][3]["data"];
        let mut raw = B64.decode(t.as_str().unwrap()).unwrap();
        raw[0] ^= 1;
        *t = serde_json::Value::String(B64.encode(raw));
        let err = Checkpoint::<f32>::decode(doc.to_string().as_bytes()).unwrap_err();
        assert!(matches!(err, CheckpointError::CorruptChecksum(_)));
    }

    #[test]
    fn future_version_is_refused() {
        let p = init_params::<f32>(3, Dims::new(3, 4, 2)).unwrap();
        let mut doc: serde_json::Value = serde_json::from_slice(&Checkpoint::new(p).encode()).unwrap();
        doc["version"] = 2.into();
        let err = Checkpoint::<f32>::decode(doc.to_string().as_bytes()).unwrap_err();
        assert!(matches!(err, CheckpointError::VersionMismatch { found: 2, supported: 1 }));
    }

    #[test]
    fn precision_header() {
        let p = init_params::<f64>(3, Dims::new(3, 4, 2)).unwrap();
        let bytes = Checkpoint::new(p.clone()).encode();
        assert_eq!(checkpoint_precision(&bytes).unwrap(), Precision::F64);
        let narrowed = Checkpoint::<f32>::decode(&bytes).unwrap();
        assert_eq!(narrowed.params, p.cast::<f32>());
    }

    #[test]
    fn save_and_load_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let p = init_params::<f32>(8, Dims::standard()).unwrap();
        save_checkpoint(&p, &path).unwrap();
        assert_eq!(bits(&load_checkpoint::<f32>(&path).unwrap()), bits(&p));
        assert!(matches!(
            load_checkpoint::<f32>(&dir.path().join("missing")),
            Err(CheckpointError::Io(_))
        ));
    }
}
