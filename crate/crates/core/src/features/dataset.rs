//! Directory-level featurization: WAV + manifest pairs in, tensors + one index out.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::phase::phase_matrix;
use super::stft::StftConfig;
use super::tensor_file::{read_phase_matrix, write_phase_matrix, PhaseMatrixMeta};
use crate::direction::Direction;
use crate::error::{Error, Result};
use crate::model::Sample;
use crate::sim::io::{list_wavs, manifest_path, read_manifest, read_wav};

pub const INDEX_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEntry {
    /// Tensor file name inside the feature directory.
    pub tensor: String,
    pub label: Option<Direction>,
    /// File name of the source WAV.
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sound_class: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureIndex {
    pub features: PhaseMatrixMeta,
    pub entries: Vec<FeatureEntry>,
}

impl FeatureIndex {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(INDEX_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))
    }
}

#[derive(Debug, Default)]
pub struct FeaturizeReport {
    pub written: usize,
    pub failures: Vec<(PathBuf, Error)>,
}

/// Writes `<stem>.tns` for every WAV in `data` plus a `manifest.json` index.
/// A file that fails is reported and skipped; the rest are still written.
/// Output depends only on the inputs, so reruns are byte-identical.
pub fn featurize_dir(data: &Path, out: &Path, stft: &StftConfig) -> Result<FeaturizeReport> {
    stft.validate()?;
    let wavs = list_wavs(data)?;
    if wavs.is_empty() {
        return Err(Error::Empty(format!("no WAV files in {}", data.display())));
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut report = FeaturizeReport::default();
    let mut entries = Vec::new();
    let mut rate = None;
    for wav in wavs {
        let result = (|| -> Result<FeatureEntry> {
            let clip = read_wav(&wav)?;
            if *rate.get_or_insert(clip.sample_rate()) != clip.sample_rate() {
                return Err(Error::invalid(format!(
                    "sample rate {} Hz differs from the first clip's {} Hz",
                    clip.sample_rate(),
                    rate.unwrap()
                )));
            }
            let manifest = read_manifest(&manifest_path(&wav)).ok();
            let meta = PhaseMatrixMeta {
                stft: *stft,
                sample_rate: clip.sample_rate(),
            };
            let stem = wav.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            let tensor = format!("{stem}.tns");
            write_phase_matrix(&out.join(&tensor), &phase_matrix(&clip, stft)?, &meta)?;
            Ok(FeatureEntry {
                tensor,
                label: manifest.as_ref().and_then(|m| m.label).or(clip.label),
                source: wav.file_name().unwrap_or_default().to_string_lossy().into_owned(),
                sound_class: manifest.and_then(|m| m.sound_class),
            })
        })();
        match result {
            Ok(e) => {
                entries.push(e);
                report.written += 1;
            }
            Err(e) => report.failures.push((wav, e)),
        }
    }
    if let Some(sample_rate) = rate {
        let index = FeatureIndex {
            features: PhaseMatrixMeta {
                stft: *stft,
                sample_rate,
            },
            entries,
        };
        let path = out.join(INDEX_FILE);
        fs::write(&path, serde_json::to_string_pretty(&index)?).map_err(|e| Error::io(&path, e))?;
    }
    Ok(report)
}

/// Loads every labeled tensor listed in the index.
pub fn load_samples(dir: &Path) -> Result<(FeatureIndex, Vec<Sample>)> {
    let index = FeatureIndex::read(dir)?;
    let mut samples = Vec::with_capacity(index.entries.len());
    for e in &index.entries {
        let Some(label) = e.label else { continue };
        let path = dir.join(&e.tensor);
        let (input, meta) = read_phase_matrix(&path)?;
        if meta.as_ref().is_some_and(|m| m != &index.features) {
            return Err(Error::format(&path, "feature settings differ from the index"));
        }
        samples.push(Sample { input, label });
    }
    if samples.is_empty() {
        return Err(Error::Empty(format!("no labeled features in {}", dir.display())));
    }
    Ok((index, samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::io::{write_dataset, WavEncoding};
    use crate::sim::{make_dataset, ArrayGeometry};

    #[test]
    fn featurize_is_idempotent_and_survives_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let (data, out) = (dir.path().join("data"), dir.path().join("feat"));
        let clips = make_dataset(&ArrayGeometry::default(), 1, 0.1, 8000, 5).unwrap();
        write_dataset(&data, &clips, WavEncoding::Float32).unwrap();
        fs::write(data.join("broken.wav"), b"RIFF nonsense").unwrap();
        let stft = StftConfig {
            window_len: 128,
            hop: 64,
            ..StftConfig::default()
        };
        let first = featurize_dir(&data, &out, &stft).unwrap();
        assert_eq!(first.written, 9);
        assert_eq!(first.failures.len(), 1);
        let snapshot = |d: &Path| {
            let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(d)
                .unwrap()
                .map(|e| {
                    let p = e.unwrap().path();
                    (
                        p.file_name().unwrap().to_string_lossy().into_owned(),
                        fs::read(&p).unwrap(),
                    )
                })
                .collect();
            files.sort();
            files
        };
        let before = snapshot(&out);
        featurize_dir(&data, &out, &stft).unwrap();
        assert_eq!(snapshot(&out), before);

        let (index, samples) = load_samples(&out).unwrap();
        assert_eq!(index.entries.len(), 9);
        assert_eq!(samples.len(), 9);
        assert_eq!(samples[0].input.shape(), [3, 65, 11]);
    }
}
