//! Binary three-dimensional tensor files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic  b"TNS3"
//! 4       4     d0     u32
//! 8       4     d1     u32
//! 12      4     d2     u32
//! 16      4·n   payload, f32 LE, row-major (d2 fastest), n = d0·d1·d2
//! ```
//!
//! Phase matrices are stored as (3, F, T); localization maps as (1, H, W).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::phase::{PhaseMatrix, NUM_PAIRS};
use super::stft::StftConfig;
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"TNS3";
pub const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    pub dims: [usize; 3],
    pub data: Vec<f32>,
}

impl Tensor3 {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(&MAGIC);
        for d in self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        if bytes.len() < HEADER_LEN || bytes[..4] != MAGIC {
            return Err(Error::format(path, "missing TNS3 header"));
        }
        let dim = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
        let dims = [dim(0), dim(1), dim(2)];
        let n = dims.iter().product::<usize>();
        if bytes.len() != HEADER_LEN + 4 * n {
            return Err(Error::format(
                path,
                format!(
                    "payload holds {} bytes, dims {:?} need {}",
                    bytes.len() - HEADER_LEN,
                    dims,
                    4 * n
                ),
            ));
        }
        let data = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self { dims, data })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes, path)
    }
}

/// JSON sidecar stored next to a phase-matrix tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMatrixMeta {
    pub stft: StftConfig,
    pub sample_rate: u32,
}

impl PhaseMatrixMeta {
    /// Stable hash of the feature settings, stored in model checkpoints so a
    /// model is never evaluated on features computed differently.
    pub fn fingerprint(&self) -> u64 {
        let json = serde_json::to_string(self).expect("plain data serializes");
        crate::seed::hash64(json.as_bytes())
    }
}

pub fn sidecar_path(tensor: &Path) -> PathBuf {
    let mut name = tensor.file_name().unwrap_or_default().to_os_string();
    name.push(".json");
    tensor.with_file_name(name)
}

pub fn write_phase_matrix(path: &Path, pm: &PhaseMatrix, meta: &PhaseMatrixMeta) -> Result<()> {
    let tensor = Tensor3 {
        dims: pm.shape(),
        data: pm.as_slice().iter().map(|&v| v as f32).collect(),
    };
    tensor.write(path)?;
    let side = sidecar_path(path);
    fs::write(&side, serde_json::to_string_pretty(meta)?).map_err(|e| Error::io(side, e))
}

pub fn read_phase_matrix(path: &Path) -> Result<(PhaseMatrix, Option<PhaseMatrixMeta>)> {
    let tensor = Tensor3::read(path)?;
    if tensor.dims[0] != NUM_PAIRS {
        return Err(Error::format(
            path,
            format!("expected {NUM_PAIRS} IPD rows, found {}", tensor.dims[0]),
        ));
    }
    let pm = PhaseMatrix::from_raw(
        tensor.data.into_iter().map(f64::from).collect(),
        tensor.dims[1],
        tensor.dims[2],
    )?;
    let side = sidecar_path(path);
    let meta = match fs::read_to_string(&side) {
        Ok(text) => Some(serde_json::from_str(&text).map_err(|e| Error::format(&side, e.to_string()))?),
        Err(_) => None,
    };
    Ok((pm, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_is_bit_exact() {
        let t = Tensor3 {
            dims: [3, 2, 1],
            data: vec![0.0, 1.0, -1.0, 0.5, 2.0, 3.25],
        };
        let bytes = t.encode();
        assert_eq!(
            &bytes[..16],
            &[b'T', b'N', b'S', b'3', 3, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0]
        );
        assert_eq!(&bytes[16..20], &0.0f32.to_le_bytes());
        assert_eq!(&bytes[20..24], &1.0f32.to_le_bytes());
        assert_eq!(bytes.len(), 16 + 24);
    }

    #[test]
    fn rejects_truncated_payload() {
        let t = Tensor3 {
            dims: [1, 2, 2],
            data: vec![1.0; 4],
        };
        let mut bytes = t.encode();
        bytes.pop();
        assert!(Tensor3::decode(&bytes, Path::new("x")).is_err());
        assert!(Tensor3::decode(b"NOPE", Path::new("x")).is_err());
    }

    #[test]
    fn phase_matrix_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let pm = PhaseMatrix::from_raw((0..24).map(|i| i as f64 * 0.125 - 1.0).collect(), 4, 2).unwrap();
        let meta = PhaseMatrixMeta {
            stft: StftConfig::default(),
            sample_rate: 16_000,
        };
        let path = dir.path().join("a.ipd");
        write_phase_matrix(&path, &pm, &meta).unwrap();
        let (back, m) = read_phase_matrix(&path).unwrap();
        assert_eq!(back, pm);
        assert_eq!(m, Some(meta));
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(d0 in 1usize..4, d1 in 1usize..5, d2 in 1usize..5, seed in any::<u32>()) {
            let n = d0 * d1 * d2;
            let data: Vec<f32> = (0..n).map(|i| ((i as u32).wrapping_mul(seed) % 1000) as f32 / 7.0).collect();
            let t = Tensor3 { dims: [d0, d1, d2], data };
            prop_assert_eq!(Tensor3::decode(&t.encode(), Path::new("x")).unwrap(), t);
        }
    }
}
