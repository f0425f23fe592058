//! Model checkpoints.
//!
//! Binary layout, integers little-endian:
//!
//! ```text
//! b"ESCK"                    magic
//! u32                        format version (1)
//! u64                        feature fingerprint (STFT settings + sample rate)
//! u64                        network config hash
//! u32 ×2                     phase-matrix bins, frames
//! u32 + bytes                network config as JSON
//! u32                        tensor count
//! per tensor: u32 + bytes    name
//!             u32 + u32×r    rank r, dims
//! f32 payloads               every tensor in directory order
//! ```
//!
//! A readable JSON sidecar `<file>.json` mirrors everything but the payload.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::JerryNetConfig;
use super::net::JerryNet;
use super::params::{ModelParams, ParamTensor};
use crate::error::{Error, Result};
use crate::features::tensor_file::PhaseMatrixMeta;
use crate::seed::hash64;

pub const MAGIC: [u8; 4] = *b"ESCK";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: JerryNetConfig,
    pub features: PhaseMatrixMeta,
    pub num_bins: usize,
    pub num_frames: usize,
    pub params: ModelParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointSidecar {
    pub version: u32,
    pub feature_hash: String,
    pub config_hash: String,
    pub features: PhaseMatrixMeta,
    pub num_bins: usize,
    pub num_frames: usize,
    pub model: JerryNetConfig,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".json");
    path.with_file_name(name)
}

impl Checkpoint {
    pub fn feature_hash(&self) -> u64 {
        self.features.fingerprint()
    }

    pub fn config_hash(&self) -> u64 {
        hash64(self.config.canonical_json().as_bytes())
    }

    pub fn network(&self) -> Result<JerryNet> {
        JerryNet::new(self.config.clone(), self.num_bins, self.num_frames)
    }

    /// Fails with [`Error::HashMismatch`] unless `data` was featurized with the
    /// same settings as the training data.
    pub fn check_features(&self, data: &PhaseMatrixMeta) -> Result<()> {
        let (checkpoint, data) = (self.feature_hash(), data.fingerprint());
        if checkpoint != data {
            return Err(Error::HashMismatch { checkpoint, data });
        }
        Ok(())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        put_u32(&mut out, VERSION);
        out.extend_from_slice(&self.feature_hash().to_le_bytes());
        out.extend_from_slice(&self.config_hash().to_le_bytes());
        put_u32(&mut out, self.num_bins as u32);
        put_u32(&mut out, self.num_frames as u32);
        put_bytes(&mut out, self.config.canonical_json().as_bytes());
        let features = serde_json::to_string(&self.features).expect("plain data serializes");
        put_bytes(&mut out, features.as_bytes());
        put_u32(&mut out, self.params.tensors.len() as u32);
        for t in &self.params.tensors {
            put_bytes(&mut out, t.name.as_bytes());
            put_u32(&mut out, t.shape.len() as u32);
            for &d in &t.shape {
                put_u32(&mut out, d as u32);
            }
        }
        for t in &self.params.tensors {
            for &v in &t.data {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, path };
        if r.take(4)? != MAGIC {
            return Err(Error::format(path, "not a checkpoint (bad magic)"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::format(path, format!("unsupported checkpoint version {version}")));
        }
        let feature_hash = r.u64()?;
        let config_hash = r.u64()?;
        let num_bins = r.u32()? as usize;
        let num_frames = r.u32()? as usize;
        let config: JerryNetConfig =
            serde_json::from_slice(r.bytes()?).map_err(|e| Error::format(path, format!("network config: {e}")))?;
        let features: PhaseMatrixMeta =
            serde_json::from_slice(r.bytes()?).map_err(|e| Error::format(path, format!("feature settings: {e}")))?;
        let count = r.u32()? as usize;
        let mut directory = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let name =
                String::from_utf8(r.bytes()?.to_vec()).map_err(|_| Error::format(path, "tensor name is not UTF-8"))?;
            let rank = r.u32()? as usize;
            let shape = (0..rank)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            directory.push((name, shape));
        }
        let mut tensors = Vec::with_capacity(directory.len());
        for (name, shape) in directory {
            let n: usize = shape.iter().product();
            let data = r
                .take(4 * n)?
                .chunks_exact(4)
                .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
                .collect();
            tensors.push(ParamTensor { name, shape, data });
        }
        if r.pos != bytes.len() {
            return Err(Error::format(path, "trailing bytes after payload"));
        }
        let ckpt = Checkpoint {
            config,
            features,
            num_bins,
            num_frames,
            params: ModelParams { tensors },
        };
        if ckpt.feature_hash() != feature_hash || ckpt.config_hash() != config_hash {
            return Err(Error::format(path, "stored hashes do not match the stored settings"));
        }
        let input = ckpt.config.input_shape(num_bins, num_frames);
        ckpt.params.check_layout(&ckpt.config, input)?;
        if !ckpt.params.all_finite() {
            return Err(Error::NonFinite(format!("weights in {}", path.display())));
        }
        Ok(ckpt)
    }

    pub fn sidecar(&self) -> CheckpointSidecar {
        CheckpointSidecar {
            version: VERSION,
            feature_hash: format!("{:016x}", self.feature_hash()),
            config_hash: format!("{:016x}", self.config_hash()),
            features: self.features.clone(),
            num_bins: self.num_bins,
            num_frames: self.num_frames,
            model: self.config.clone(),
            tensors: self
                .params
                .tensors
                .iter()
                .map(|t| TensorEntry {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                })
                .collect(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()).map_err(|e| Error::io(path, e))?;
        let side = sidecar_path(path);
        fs::write(&side, serde_json::to_string_pretty(&self.sidecar())?).map_err(|e| Error::io(side, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes, path)
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    put_u32(out, b.len() as u32);
    out.extend_from_slice(b);
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::format(self.path, "truncated checkpoint"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.u32()? as usize;
        self.take(n)
    }
}
