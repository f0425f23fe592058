//! Clip persistence: four-channel WAV plus a JSON manifest sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use serde::{Deserialize, Serialize};

use super::source::SignalKind;
use super::synth::{MultiChannelClip, SimulatedClip, NUM_MICS};
use crate::direction::Direction;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WavEncoding {
    Pcm16,
    #[default]
    Float32,
}

/// Sidecar written next to every simulated WAV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipManifest {
    pub label: Option<Direction>,
    pub azimuth_deg: f64,
    pub distance_m: f64,
    pub snr_db: Option<f64>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sound_class: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal: Option<SignalKind>,
}

impl From<&SimulatedClip> for ClipManifest {
    fn from(sim: &SimulatedClip) -> Self {
        Self {
            label: Some(sim.source.direction),
            azimuth_deg: sim.source.azimuth_deg,
            distance_m: sim.source.distance_m,
            snr_db: sim.source.snr_db,
            seed: sim.seed,
            sound_class: sim.source.sound_class.clone(),
            signal: Some(sim.source.signal),
        }
    }
}

/// Path of the JSON sidecar belonging to a WAV file.
pub fn manifest_path(wav: &Path) -> PathBuf {
    wav.with_extension("json")
}

pub fn write_wav(path: &Path, clip: &MultiChannelClip, encoding: WavEncoding) -> Result<()> {
    let spec = WavSpec {
        channels: NUM_MICS as u16,
        sample_rate: clip.sample_rate(),
        bits_per_sample: match encoding {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Float32 => 32,
        },
        sample_format: match encoding {
            WavEncoding::Pcm16 => SampleFormat::Int,
            WavEncoding::Float32 => SampleFormat::Float,
        },
    };
    let mut writer = WavWriter::create(path, spec)?;
    for n in 0..clip.len() {
        for ch in clip.channels() {
            let v = ch[n].clamp(-1.0, 1.0);
            match encoding {
                WavEncoding::Pcm16 => writer.write_sample((v * i16::MAX as f64).round() as i16)?,
                WavEncoding::Float32 => writer.write_sample(v as f32)?,
            }
        }
    }
    writer.finalize()?;
    Ok(())
}

/// Reads a four-channel WAV (16-bit PCM or 32-bit float). The label is taken
/// from the sidecar when present.
pub fn read_wav(path: &Path) -> Result<MultiChannelClip> {
    let mut reader = WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels as usize != NUM_MICS {
        return Err(Error::format(
            path,
            format!("expected {NUM_MICS} channels, found {}", spec.channels),
        ));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()?,
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / i16::MAX as f64))
            .collect::<Result<_, _>>()?,
        (fmt, bits) => {
            return Err(Error::format(
                path,
                format!("unsupported sample format {fmt:?}/{bits} bit"),
            ))
        }
    };
    let frames = interleaved.len() / NUM_MICS;
    let mut channels: Vec<Vec<f64>> = (0..NUM_MICS).map(|_| Vec::with_capacity(frames)).collect();
    for frame in interleaved.chunks_exact(NUM_MICS) {
        for (ch, v) in channels.iter_mut().zip(frame) {
            ch.push(*v);
        }
    }
    let label = match read_manifest(&manifest_path(path)) {
        Ok(m) => m.label,
        Err(Error::Io { .. }) => None,
        Err(e) => return Err(e),
    };
    MultiChannelClip::new(channels, spec.sample_rate, label)
}

pub fn write_manifest(path: &Path, manifest: &ClipManifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<ClipManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

/// Writes `clip_NNNN.wav` + `clip_NNNN.json` for each clip and returns the WAV paths.
pub fn write_dataset(dir: &Path, clips: &[SimulatedClip], encoding: WavEncoding) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::with_capacity(clips.len());
    for (i, sim) in clips.iter().enumerate() {
        let wav = dir.join(format!("clip_{i:04}.wav"));
        write_wav(&wav, &sim.clip, encoding)?;
        write_manifest(&manifest_path(&wav), &ClipManifest::from(sim))?;
        paths.push(wav);
    }
    Ok(paths)
}

/// WAV files in `dir`, sorted by name.
pub fn list_wavs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")))
        .collect();
    out.sort();
    Ok(out)
}
