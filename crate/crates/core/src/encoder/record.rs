use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Dtype, Real, Tensor};

use super::{EncoderDescriptor, ModelParams, Role};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub role: Role,
    pub shape: Vec<usize>,
    /// Element offset into the payload.
    pub offset: usize,
    pub len: usize,
}

/// Flat, transport-ready form of a [`ModelParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParamRecord<T> {
    pub descriptor: EncoderDescriptor,
    pub dtype: Dtype,
    pub manifest: Vec<ManifestEntry>,
    pub payload: Vec<T>,
}

pub fn export_params<T: Real>(params: &ModelParams<T>) -> ParamRecord<T> {
    let mut manifest = Vec::with_capacity(params.tensors().len());
    let mut payload = Vec::with_capacity(params.num_scalars());
    for (name, t) in params.tensors() {
        manifest.push(ManifestEntry {
            name: name.clone(),
            role: Role::of(name).expect("parameter names carry a role prefix"),
            shape: t.shape().to_vec(),
            offset: payload.len(),
            len: t.numel(),
        });
        payload.extend_from_slice(t.data());
    }
    ParamRecord {
        descriptor: params.descriptor().clone(),
        dtype: T::DTYPE,
        manifest,
        payload,
    }
}

/// Checks manifest entries against the descriptor layout and the payload extent.
pub fn validate_manifest(
    descriptor: &EncoderDescriptor,
    manifest: &[ManifestEntry],
    payload_len: usize,
) -> Result<()> {
    let layout = descriptor.layout();
    if layout.len() != manifest.len() {
        return Err(Error::Manifest(format!(
            "descriptor has {} parameters, manifest {}",
            layout.len(),
            manifest.len()
        )));
    }
    let mut cursor = 0;
    for ((name, shape), entry) in layout.iter().zip(manifest) {
        if *name != entry.name || *shape != entry.shape {
            return Err(Error::Manifest(format!(
                "expected {name} {shape:?}, manifest has {} {:?}",
                entry.name, entry.shape
            )));
        }
        if Role::of(name) != Some(entry.role) {
            return Err(Error::Manifest(format!("wrong role for {name}")));
        }
        let n: usize = shape.iter().product();
        if entry.len != n || entry.offset != cursor {
            return Err(Error::Manifest(format!(
                "{name}: offset {} len {} does not continue the payload at {cursor} with {n} elements",
                entry.offset, entry.len
            )));
        }
        cursor += n;
    }
    if cursor != payload_len {
        return Err(Error::Manifest(format!(
            "manifest covers {cursor} elements but payload holds {payload_len}"
        )));
    }
    Ok(())
}

pub fn import_params<T: Real>(record: &ParamRecord<T>) -> Result<ModelParams<T>> {
    if record.dtype != T::DTYPE {
        return Err(Error::Manifest(format!(
            "record holds {:?} values, expected {:?}",
            record.dtype,
            T::DTYPE
        )));
    }
    validate_manifest(&record.descriptor, &record.manifest, record.payload.len())?;
    let tensors = record
        .manifest
        .iter()
        .map(|e| {
            let data = record.payload[e.offset..e.offset + e.len].to_vec();
            Ok((e.name.clone(), Tensor::new(e.shape.clone(), data)?))
        })
        .collect::<Result<_>>()?;
    ModelParams::from_tensors(record.descriptor.clone(), tensors)
}
