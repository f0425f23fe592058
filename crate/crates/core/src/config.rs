//! Run configuration, one TOML file for every command.
//!
//! Every section is optional and falls back to its defaults; unknown keys are
//! rejected. Relative paths in `[paths]` resolve against the config file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::{ClassifierConfig, ExternalProvider, MelEmbedder};
use crate::error::{Error, Result};
use crate::features::StftConfig;
use crate::fusion::FusionConfig;
use crate::model::{JerryNetConfig, TrainConfig};
use crate::pipeline::LoopConfig;
use crate::sim::io::WavEncoding;
use crate::sim::{ArrayGeometry, SimConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub per_class: usize,
    /// Seconds per clip.
    pub duration_s: f64,
    /// Hz.
    pub sample_rate: u32,
    pub seed: u64,
    pub encoding: WavEncoding,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            per_class: 50,
            duration_s: 2.0,
            sample_rate: 16_000,
            seed: 7,
            encoding: WavEncoding::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub mel: MelEmbedder,
    /// Replaces the mel/template provider when set.
    pub external: Option<ExternalProvider>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub data: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub templates: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: ArrayGeometry,
    pub dataset: DatasetConfig,
    pub sim: SimConfig,
    pub stft: StftConfig,
    pub model: JerryNetConfig,
    pub train: TrainConfig,
    pub classifier: ClassifierConfig,
    pub embedding: EmbeddingConfig,
    pub fusion: FusionConfig,
    #[serde(rename = "loop")]
    pub cycle: LoopConfig,
    pub paths: PathsConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::format(origin, e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses, resolves `[paths]` against the file's directory and checks that
    /// every configured path has an existing parent directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.paths.data,
            &mut cfg.paths.features,
            &mut cfg.paths.checkpoint,
            &mut cfg.paths.templates,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
            let parent = p
                .parent()
                .filter(|d| !d.as_os_str().is_empty())
                .unwrap_or(Path::new("."));
            if !parent.is_dir() {
                return Err(Error::io(
                    &*p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "parent directory does not exist"),
                ));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.stft.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        if self.dataset.per_class == 0 {
            return Err(Error::invalid("dataset.per_class must be at least 1"));
        }
        if !(self.dataset.duration_s > 0.0) {
            return Err(Error::invalid("dataset.duration_s must be positive"));
        }
        if !(self.classifier.temperature > 0.0) {
            return Err(Error::invalid("classifier.temperature must be positive"));
        }
        if !(0.0..=1.0).contains(&self.fusion.tau) {
            return Err(Error::invalid("fusion.tau must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// Reads an array geometry from JSON (`.json`) or TOML (anything else).
pub fn load_geometry(path: &Path) -> Result<ArrayGeometry> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let geometry: ArrayGeometry = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?
    } else {
        toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?
    };
    geometry.validate()?;
    Ok(geometry)
}
