//! `DPRC` checkpoint files.
//!
//! Layout: magic `DPRC`; u32 version; u32 header length; UTF-8 JSON header; then every
//! array listed in the header as little-endian f32, in header order. The header carries
//! the architecture, epoch, provenance, and the SHA-256 of the array payload.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::model::{ArchConfig, Model};
use super::params::ParamSet;
use super::tensor::Tensor;

pub const DPRC_MAGIC: &[u8; 4] = b"DPRC";
pub const DPRC_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub description: String,
    pub seed: u64,
    /// SHA-256 of the checkpoint file this one was fine-tuned from.
    pub parent_sha256: Option<String>,
    /// How inputs are scaled before entering the network.
    pub normalization: String,
    pub moments_reset: bool,
}

impl Provenance {
    pub fn new(description: impl Into<String>, seed: u64) -> Self {
        Self {
            description: description.into(),
            seed,
            parent_sha256: None,
            normalization: NORMALIZATION.to_string(),
            moments_reset: false,
        }
    }
}

/// Inputs and targets are divided by the input cube's maximum; outputs are multiplied back.
pub const NORMALIZATION: &str = "per-cube-max";

#[derive(Debug, Clone, PartialEq)]
pub struct AdamMoments {
    pub m: ParamSet,
    pub v: ParamSet,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub arch: ArchConfig,
    pub params: ParamSet,
    pub buffers: ParamSet,
    pub adam: Option<AdamMoments>,
    pub epoch: usize,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ArrayKind {
    Param,
    Buffer,
    AdamM,
    AdamV,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ArrayEntry {
    name: String,
    kind: ArrayKind,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    arch: ArchConfig,
    epoch: usize,
    provenance: Provenance,
    adam_step: Option<u64>,
    payload_sha256: String,
    arrays: Vec<ArrayEntry>,
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

impl Checkpoint {
    pub fn from_model(model: &Model, adam: Option<AdamMoments>, epoch: usize, provenance: Provenance) -> Self {
        Self {
            arch: model.arch,
            params: model.params.clone(),
            buffers: model.buffers.clone(),
            adam,
            epoch,
            provenance,
        }
    }

    /// Rebuilds the network and loads these weights into it.
    pub fn to_model(&self) -> Result<Model> {
        let mut model = Model::build(self.arch, 0)?;
        model.params.assign(&self.params)?;
        model.buffers.assign(&self.buffers)?;
        Ok(model)
    }

    fn groups(&self) -> Vec<(ArrayKind, &ParamSet)> {
        let mut g = vec![(ArrayKind::Param, &self.params), (ArrayKind::Buffer, &self.buffers)];
        if let Some(a) = &self.adam {
            g.push((ArrayKind::AdamM, &a.m));
            g.push((ArrayKind::AdamV, &a.v));
        }
        g
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut payload = Vec::new();
        let mut arrays = Vec::new();
        for (kind, set) in self.groups() {
            for (name, t) in set.names.iter().zip(&set.tensors) {
                arrays.push(ArrayEntry {
                    name: name.clone(),
                    kind,
                    shape: t.shape.clone(),
                });
                for &v in &t.data {
                    let f = v as f32;
                    if !f.is_finite() {
                        return Err(Error::Validation(format!("array {name} has non-finite values")));
                    }
                    payload.extend_from_slice(&f.to_le_bytes());
                }
            }
        }
        let header = Header {
            arch: self.arch,
            epoch: self.epoch,
            provenance: self.provenance.clone(),
            adam_step: self.adam.as_ref().map(|a| a.step),
            payload_sha256: sha256_hex(&payload),
            arrays,
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
        let mut out = Vec::with_capacity(12 + json.len() + payload.len());
        out.extend_from_slice(DPRC_MAGIC);
        out.extend_from_slice(&DPRC_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&payload);
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let err = |m: &str| Error::Format(format!("DPRC: {m}"));
        if bytes.len() < 12 || &bytes[..4] != DPRC_MAGIC {
            return Err(err("bad magic"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != DPRC_VERSION {
            return Err(err(&format!("unsupported version {version}")));
        }
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let json = bytes.get(12..12 + hlen).ok_or_else(|| err("truncated header"))?;
        let header: Header = serde_json::from_slice(json).map_err(|e| err(&e.to_string()))?;
        let payload = &bytes[12 + hlen..];
        let total: usize = header.arrays.iter().map(|a| a.shape.iter().product::<usize>()).sum();
        if payload.len() != total * 4 {
            return Err(err(&format!("payload has {} bytes, header declares {}", payload.len(), total * 4)));
        }
        if sha256_hex(payload) != header.payload_sha256 {
            return Err(err("payload hash mismatch"));
        }
        let mut sets = [ParamSet::new(), ParamSet::new(), ParamSet::new(), ParamSet::new()];
        let mut off = 0;
        for a in &header.arrays {
            let n: usize = a.shape.iter().product();
            let data = payload[off..off + 4 * n]
                .chunks_exact(4)
                .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
                .collect();
            off += 4 * n;
            let slot = match a.kind {
                ArrayKind::Param => 0,
                ArrayKind::Buffer => 1,
                ArrayKind::AdamM => 2,
                ArrayKind::AdamV => 3,
            };
            sets[slot].push(a.name.clone(), Tensor::new(a.shape.clone(), data)?);
        }
        let [params, buffers, m, v] = sets;
        let adam = header.adam_step.map(|step| AdamMoments { m, v, step });
        let ckpt = Self {
            arch: header.arch,
            params,
            buffers,
            adam,
            epoch: header.epoch,
            provenance: header.provenance,
        };
        ckpt.check_layout()?;
        Ok(ckpt)
    }

    /// Array names and shapes must match the declared architecture.
    fn check_layout(&self) -> Result<()> {
        let reference = Model::build(self.arch, 0)?;
        let same = |a: &ParamSet, b: &ParamSet| {
            a.names == b.names && a.tensors.iter().zip(&b.tensors).all(|(x, y)| x.shape == y.shape)
        };
        if !same(&self.params, &reference.params) || !same(&self.buffers, &reference.buffers) {
            return Err(Error::Config("checkpoint arrays do not match its architecture".into()));
        }
        if let Some(a) = &self.adam {
            if !same(&a.m, &reference.params) || !same(&a.v, &reference.params) {
                return Err(Error::Config("optimizer moments do not match the parameters".into()));
            }
        }
        Ok(())
    }

    /// SHA-256 of the encoded file.
    pub fn sha256(&self) -> Result<String> {
        Ok(sha256_hex(&self.encode()?))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.encode()?;
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes)
    }
}
