use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ModelConfig, ModelError};
use super::optim::AdamState;
use super::params::Parameters;
use super::tape::Tensor;
use crate::crystal::GraphConfig;

const MAGIC: &[u8; 8] = b"CFCK0001";

/// Everything needed to rebuild inputs compatible with a set of weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub model: ModelConfig,
    pub graph: GraphConfig,
    /// Name of the regression target the model was trained on.
    pub target: String,
    /// Unit string echoed into evaluation output.
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub epoch: usize,
    pub params: Parameters,
    pub adam: AdamState,
}

/// SHA-256 of the serialized metadata; stored in the file and rechecked on
/// load so weights cannot be silently paired with a different config.
pub fn config_hash(meta: &CheckpointMeta) -> [u8; 32] {
    let json = serde_json::to_vec(meta).expect("meta serializes");
    Sha256::digest(&json).into()
}

impl Checkpoint {
    /// Serializes to the on-disk layout: magic, metadata JSON with its
    /// hash, step counters, then each tensor (sorted by name) as shape plus
    /// weights and both Adam moments, all little-endian f64.
    pub fn to_bytes(&self) -> Vec<u8> {
        let meta_json = serde_json::to_vec(&self.meta).expect("meta serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(meta_json.len() as u64).to_le_bytes());
        out.extend_from_slice(&meta_json);
        out.extend_from_slice(&Sha256::digest(&meta_json));
        out.extend_from_slice(&(self.epoch as u64).to_le_bytes());
        out.extend_from_slice(&self.adam.t.to_le_bytes());
        out.extend_from_slice(&(self.params.tensors.len() as u64).to_le_bytes());
        for (name, tensor) in &self.params.tensors {
            out.extend_from_slice(&(name.len() as u64).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(tensor.rows as u64).to_le_bytes());
            out.extend_from_slice(&(tensor.cols as u64).to_le_bytes());
            let zeros = Tensor::zeros(tensor.rows, tensor.cols);
            let m = self.adam.m.get(name).unwrap_or(&zeros);
            let v = self.adam.v.get(name).unwrap_or(&zeros);
            for part in [tensor, m, v] {
                for x in &part.data {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let meta_len = r.u64()? as usize;
        let meta_json = r.take(meta_len)?.to_vec();
        let stored_hash = r.take(32)?.to_vec();
        if Sha256::digest(&meta_json).as_slice() != stored_hash {
            return Err(bad("config hash mismatch"));
        }
        let meta: CheckpointMeta =
            serde_json::from_slice(&meta_json).map_err(|e| bad(&format!("bad metadata: {e}")))?;
        let epoch = r.u64()? as usize;
        let t = r.u64()?;
        let count = r.u64()? as usize;

        let mut tensors = BTreeMap::new();
        let mut m_map = BTreeMap::new();
        let mut v_map = BTreeMap::new();
        for _ in 0..count {
            let name_len = r.u64()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| bad("tensor name is not utf-8"))?;
            let rows = r.u64()? as usize;
            let cols = r.u64()? as usize;
            let len = rows
                .checked_mul(cols)
                .ok_or_else(|| bad("tensor shape overflow"))?;
            let mut parts = Vec::with_capacity(3);
            for _ in 0..3 {
                let mut data = Vec::with_capacity(len);
                for _ in 0..len {
                    data.push(f64::from_le_bytes(r.take(8)?.try_into().unwrap()));
                }
                parts.push(Tensor { rows, cols, data });
            }
            let v = parts.pop().unwrap();
            let m = parts.pop().unwrap();
            let w = parts.pop().unwrap();
            if tensors.insert(name.clone(), w).is_some() {
                return Err(bad(&format!("duplicate tensor {name:?}")));
            }
            m_map.insert(name.clone(), m);
            v_map.insert(name, v);
        }
        if r.pos != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        Ok(Checkpoint {
            meta,
            epoch,
            params: Parameters { tensors },
            adam: AdamState {
                t,
                m: m_map,
                v: v_map,
            },
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn bad(msg: &str) -> ModelError {
    ModelError::BadCheckpoint(msg.to_string())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        if self.buf.len() - self.pos < n {
            return Err(bad("file is truncated"));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
