//! Checkpoint container.
//!
//! Layout: `"FXCK"`, version `u32`, manifest length `u64`, the JSON manifest,
//! then the raw little-endian payload. All integers are little-endian.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoder::{
    export_params, import_params, EncoderDescriptor, ManifestEntry, ModelParams, ParamRecord, Role,
};
use crate::error::{Error, Result};
use crate::numerics::{Dtype, Real};

const MAGIC: &[u8; 4] = b"FXCK";
const VERSION: u32 = 1;
const PREFIX_LEN: usize = 4 + 4 + 8;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointEntry {
    pub name: String,
    pub role: Role,
    pub shape: Vec<usize>,
    /// Offset into the payload in bytes.
    pub byte_offset: usize,
    pub byte_len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub descriptor: EncoderDescriptor,
    pub descriptor_hash: String,
    pub dtype: Dtype,
    /// Number of completed rounds the parameters reflect.
    pub round: usize,
    pub config_hash: String,
    pub entries: Vec<CheckpointEntry>,
}

impl CheckpointManifest {
    /// Rejects overlapping, gapped or short entries and a stale descriptor hash.
    pub fn validate(&self, payload_bytes: usize) -> Result<()> {
        if self.descriptor.hash() != self.descriptor_hash {
            return Err(Error::DescriptorMismatch(format!(
                "manifest descriptor hashes to {}, recorded {}",
                self.descriptor.hash(),
                self.descriptor_hash
            )));
        }
        let width = self.dtype.size_of();
        if !payload_bytes.is_multiple_of(width) {
            return Err(Error::Manifest(format!(
                "payload of {payload_bytes} bytes is not a whole number of {:?} values",
                self.dtype
            )));
        }
        let elements = self
            .entries
            .iter()
            .map(|e| {
                if e.byte_offset % width != 0 || e.byte_len % width != 0 {
                    return Err(Error::Manifest(format!(
                        "{} is not aligned to {width} bytes",
                        e.name
                    )));
                }
                Ok(ManifestEntry {
                    name: e.name.clone(),
                    role: e.role,
                    shape: e.shape.clone(),
                    offset: e.byte_offset / width,
                    len: e.byte_len / width,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        crate::encoder::validate_manifest(&self.descriptor, &elements, payload_bytes / width)
    }
}

pub fn encode_checkpoint<T: Real>(
    params: &ModelParams<T>,
    round: usize,
    config_hash: &str,
) -> Result<Vec<u8>> {
    let record = export_params(params);
    let width = T::DTYPE.size_of();
    let manifest = CheckpointManifest {
        descriptor_hash: record.descriptor.hash(),
        descriptor: record.descriptor,
        dtype: T::DTYPE,
        round,
        config_hash: config_hash.to_string(),
        entries: record
            .manifest
            .into_iter()
            .map(|e| CheckpointEntry {
                name: e.name,
                role: e.role,
                shape: e.shape,
                byte_offset: e.offset * width,
                byte_len: e.len * width,
            })
            .collect(),
    };
    let json = serde_json::to_vec(&manifest)?;
    let mut out = Vec::with_capacity(PREFIX_LEN + json.len() + record.payload.len() * width);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for v in record.payload {
        v.write_le(&mut out);
    }
    Ok(out)
}

/// Splits a checkpoint into its validated manifest and payload bytes.
pub fn decode_manifest(bytes: &[u8]) -> Result<(CheckpointManifest, &[u8])> {
    if bytes.len() < PREFIX_LEN || &bytes[..4] != MAGIC {
        return Err(Error::Manifest("not a checkpoint (bad magic)".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Manifest(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let end = PREFIX_LEN
        .checked_add(len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Manifest(format!("manifest of {len} bytes overruns the file")))?;
    let manifest: CheckpointManifest = serde_json::from_slice(&bytes[PREFIX_LEN..end])?;
    let payload = &bytes[end..];
    manifest.validate(payload.len())?;
    Ok((manifest, payload))
}

pub fn decode_checkpoint<T: Real>(bytes: &[u8]) -> Result<(ModelParams<T>, CheckpointManifest)> {
    let (manifest, payload) = decode_manifest(bytes)?;
    if manifest.dtype != T::DTYPE {
        return Err(Error::Manifest(format!(
            "checkpoint holds {:?} values, expected {:?}",
            manifest.dtype,
            T::DTYPE
        )));
    }
    let width = T::DTYPE.size_of();
    let record = ParamRecord {
        descriptor: manifest.descriptor.clone(),
        dtype: T::DTYPE,
        manifest: manifest
            .entries
            .iter()
            .map(|e| ManifestEntry {
                name: e.name.clone(),
                role: e.role,
                shape: e.shape.clone(),
                offset: e.byte_offset / width,
                len: e.byte_len / width,
            })
            .collect(),
        payload: payload.chunks_exact(width).map(T::read_le).collect(),
    };
    Ok((import_params(&record)?, manifest))
}

pub fn save_checkpoint<T: Real>(
    path: &Path,
    params: &ModelParams<T>,
    round: usize,
    config_hash: &str,
) -> Result<()> {
    let bytes = encode_checkpoint(params, round, config_hash)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Real>(path: &Path) -> Result<(ModelParams<T>, CheckpointManifest)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

/// A checkpoint in whichever precision it was written.
#[derive(Clone, Debug)]
pub enum LoadedModel {
    F32(ModelParams<f32>),
    F64(ModelParams<f64>),
}

impl LoadedModel {
    pub fn load(path: &Path) -> Result<(Self, CheckpointManifest)> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let (manifest, _) = decode_manifest(&bytes)?;
        Ok(match manifest.dtype {
            Dtype::F32 => (LoadedModel::F32(decode_checkpoint(&bytes)?.0), manifest),
            Dtype::F64 => (LoadedModel::F64(decode_checkpoint(&bytes)?.0), manifest),
        })
    }

    pub fn descriptor(&self) -> &EncoderDescriptor {
        match self {
            LoadedModel::F32(m) => m.descriptor(),
            LoadedModel::F64(m) => m.descriptor(),
        }
    }

    /// Widens to `f64`; exact for both precisions.
    pub fn to_f64(&self) -> ModelParams<f64> {
        match self {
            LoadedModel::F32(m) => m.cast(),
            LoadedModel::F64(m) => m.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::build_encoder;

    #[test]
    fn round_trip_is_bitwise() {
        let d = EncoderDescriptor::mlp(12).with_predictor(true);
        let p: ModelParams<f32> = build_encoder(&d, 5).unwrap();
        let bytes = encode_checkpoint(&p, 3, "abc").unwrap();
        let (back, manifest) = decode_checkpoint::<f32>(&bytes).unwrap();
        assert_eq!(back, p);
        assert_eq!(manifest.round, 3);
        assert_eq!(encode_checkpoint(&back, 3, "abc").unwrap(), bytes);
        assert!(decode_checkpoint::<f64>(&bytes).is_err());
    }

    #[test]
    fn tampering_is_rejected() {
        let d = EncoderDescriptor::mlp(4);
        let p: ModelParams<f64> = build_encoder(&d, 1).unwrap();
        let bytes = encode_checkpoint(&p, 0, "").unwrap();
        assert!(decode_checkpoint::<f64>(&bytes[..bytes.len() - 8]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_checkpoint::<f64>(&bad).is_err());

        let (mut manifest, payload) = decode_manifest(&bytes).unwrap();
        manifest.descriptor.embed_dim += 1;
        assert!(matches!(
            manifest.validate(payload.len()),
            Err(Error::DescriptorMismatch(_))
        ));
    }
}
