use crate::error::{ModelError, Result};
use crate::model::{BnState, ModelInstance, ModelSpec, Param, ParamKind};
use hge_core::Real;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

/// 8-byte file magic: format tag padded with NULs.
pub const MAGIC: [u8; 8] = *b"HGE0\0\0\0\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamMeta {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub kind: ParamKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BnStateJson {
    Lorentz { mean: Vec<f64>, var: f64 },
    Euclid { mean: Vec<f64>, var: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub spec: ModelSpec,
    pub init_seed: u64,
    pub epoch: usize,
    pub metrics: serde_json::Value,
    pub params: Vec<ParamMeta>,
    pub bn: Vec<BnStateJson>,
    /// FNV-1a hash of the float payload bytes.
    pub payload_hash: String,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Serialize the model: magic, little-endian u32 header length, JSON header,
/// then every parameter as little-endian f32 in declared order.
pub fn save_checkpoint<T: Real>(
    model: &ModelInstance<T>,
    epoch: usize,
    metrics: serde_json::Value,
    path: &Path,
) -> Result<()> {
    let mut payload = Vec::new();
    for p in &model.params {
        for &v in &p.value {
            let f = v.to_f64().unwrap_or(f64::NAN) as f32;
            payload.extend_from_slice(&f.to_le_bytes());
        }
    }
    let header = CheckpointHeader {
        format_version: FORMAT_VERSION,
        spec: model.spec.clone(),
        init_seed: model.init_seed,
        epoch,
        metrics,
        params: model
            .params
            .iter()
            .map(|p| ParamMeta { name: p.name.clone(), rows: p.rows, cols: p.cols, kind: p.kind })
            .collect(),
        bn: model
            .bn
            .iter()
            .map(|s| match s {
                BnState::Lorentz { mean, var } => BnStateJson::Lorentz {
                    mean: mean.iter().map(|v| v.to_f64().unwrap()).collect(),
                    var: var.to_f64().unwrap(),
                },
                BnState::Euclid { mean, var } => BnStateJson::Euclid {
                    mean: mean.iter().map(|v| v.to_f64().unwrap()).collect(),
                    var: var.iter().map(|v| v.to_f64().unwrap()).collect(),
                },
            })
            .collect(),
        payload_hash: format!("{:016x}", fnv1a(&payload)),
    };
    let header_bytes = serde_json::to_vec(&header)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&MAGIC)?;
    f.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    f.write_all(&header_bytes)?;
    f.write_all(&payload)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelInstance<f32>, CheckpointHeader)> {
    let mut f = std::fs::File::open(path)?;
    let mut magic = [0u8; 8];
    f.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(ModelError::CheckpointMismatch("bad magic bytes".into()));
    }
    let mut len_bytes = [0u8; 4];
    f.read_exact(&mut len_bytes)?;
    let header_len = u32::from_le_bytes(len_bytes) as usize;
    let mut header_bytes = vec![0u8; header_len];
    f.read_exact(&mut header_bytes)?;
    let header: CheckpointHeader = serde_json::from_slice(&header_bytes)?;
    if header.format_version != FORMAT_VERSION {
        return Err(ModelError::CheckpointMismatch(format!(
            "format version {} unsupported",
            header.format_version
        )));
    }
    let mut payload = Vec::new();
    f.read_to_end(&mut payload)?;
    let expected: usize = header.params.iter().map(|p| p.rows * p.cols * 4).sum();
    if payload.len() != expected {
        return Err(ModelError::CheckpointMismatch(format!(
            "payload is {} bytes, expected {expected}",
            payload.len()
        )));
    }
    if format!("{:016x}", fnv1a(&payload)) != header.payload_hash {
        return Err(ModelError::CheckpointMismatch("payload hash mismatch".into()));
    }
    let mut params = Vec::with_capacity(header.params.len());
    let mut offset = 0;
    for meta in &header.params {
        let n = meta.rows * meta.cols;
        let value: Vec<f32> = (0..n)
            .map(|i| {
                let at = offset + i * 4;
                f32::from_le_bytes(payload[at..at + 4].try_into().unwrap())
            })
            .collect();
        offset += n * 4;
        params.push(Param {
            name: meta.name.clone(),
            rows: meta.rows,
            cols: meta.cols,
            value,
            kind: meta.kind,
        });
    }
    let bn = header
        .bn
        .iter()
        .map(|s| match s {
            BnStateJson::Lorentz { mean, var } => BnState::Lorentz {
                mean: mean.iter().map(|&v| v as f32).collect(),
                var: *var as f32,
            },
            BnStateJson::Euclid { mean, var } => BnState::Euclid {
                mean: mean.iter().map(|&v| v as f32).collect(),
                var: var.iter().map(|&v| v as f32).collect(),
            },
        })
        .collect();
    let model = ModelInstance {
        spec: header.spec.clone(),
        params,
        bn,
        init_seed: header.init_seed,
    };
    Ok((model, header))
}
