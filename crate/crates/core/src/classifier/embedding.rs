use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::scoring::normalized;
use crate::error::{Error, Result};
use crate::features::{stft, StftConfig, WindowFn};
use crate::sim::io::{write_wav, WavEncoding};
use crate::sim::MultiChannelClip;

/// Maps audio and class names into a shared unit-norm embedding space.
pub trait EmbeddingProvider {
    fn dim(&self) -> usize;
    fn embed_audio(&self, clip: &MultiChannelClip) -> Result<Vec<f64>>;
    fn embed_text(&self, class_name: &str) -> Result<Vec<f64>>;
}

/// Log mel-band energies of the mono mixdown, mean-centered and unit-normalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MelEmbedder {
    pub num_bands: usize,
    pub window_len: usize,
    pub hop: usize,
    /// Band energies are floored at this fraction of the largest band.
    pub floor_ratio: f64,
}

impl Default for MelEmbedder {
    fn default() -> Self {
        Self {
            num_bands: 64,
            window_len: 1024,
            hop: 512,
            floor_ratio: 1e-10,
        }
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

impl MelEmbedder {
    /// Triangular filters evenly spaced in mel between 0 Hz and Nyquist,
    /// `num_bands` rows over `window_len / 2 + 1` bins.
    pub fn filterbank(&self, sample_rate: f64) -> Vec<Vec<f64>> {
        let bins = self.window_len / 2 + 1;
        let df = sample_rate / self.window_len as f64;
        let top = hz_to_mel(sample_rate / 2.0);
        let edges: Vec<f64> = (0..self.num_bands + 2)
            .map(|i| mel_to_hz(top * i as f64 / (self.num_bands + 1) as f64))
            .collect();
        (0..self.num_bands)
            .map(|b| {
                let (lo, mid, hi) = (edges[b], edges[b + 1], edges[b + 2]);
                (0..bins)
                    .map(|k| {
                        let f = k as f64 * df;
                        if f <= lo || f >= hi {
                            0.0
                        } else if f <= mid {
                            (f - lo) / (mid - lo)
                        } else {
                            (hi - f) / (hi - mid)
                        }
                    })
                    .collect()
            })
            .collect()
    }

    pub fn embed(&self, clip: &MultiChannelClip) -> Result<Vec<f64>> {
        if self.num_bands < 2 {
            return Err(Error::invalid("mel embedding needs at least two bands"));
        }
        let cfg = StftConfig {
            window_len: self.window_len,
            hop: self.hop,
            window: WindowFn::Hann,
        };
        let sr = f64::from(clip.sample_rate());
        let spec = stft(&clip.mono(), sr, &cfg)?;
        let frames = spec.num_frames() as f64;
        let power: Vec<f64> = (0..spec.num_bins())
            .map(|f| spec.bin(f).iter().map(|c| c.norm_sqr()).sum::<f64>() / frames)
            .collect();
        let energies: Vec<f64> = self
            .filterbank(sr)
            .iter()
            .map(|w| w.iter().zip(&power).map(|(a, p)| a * p).sum())
            .collect();
        let max = energies.iter().copied().fold(0.0, f64::max);
        if !(max > 0.0) {
            return Err(Error::Empty("clip is silent".into()));
        }
        let logs: Vec<f64> = energies.iter().map(|e| (e + self.floor_ratio * max).ln()).collect();
        let mean = logs.iter().sum::<f64>() / logs.len() as f64;
        let centered: Vec<f64> = logs.iter().map(|v| v - mean).collect();
        normalized(&centered).map_err(|_| Error::invalid("clip has a flat mel spectrum"))
    }
}

/// Per-class unit vectors, stored as a JSON object `{class: [floats]}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TemplateStore {
    templates: BTreeMap<String, Vec<f64>>,
}

impl TemplateStore {
    /// Normalizes every vector and checks that all share one dimension.
    pub fn new(templates: BTreeMap<String, Vec<f64>>) -> Result<Self> {
        let mut dim = None;
        let mut out = BTreeMap::new();
        for (name, v) in templates {
            if *dim.get_or_insert(v.len()) != v.len() {
                return Err(Error::ShapeMismatch {
                    expected: format!("dimension {}", dim.unwrap()),
                    actual: format!("dimension {} for `{name}`", v.len()),
                });
            }
            let v = normalized(&v).map_err(|e| Error::invalid(format!("template `{name}`: {e}")))?;
            out.insert(name, v);
        }
        Ok(Self { templates: out })
    }

    /// Mean embedding per class, normalized.
    pub fn fit<I: IntoIterator<Item = (String, Vec<f64>)>>(samples: I) -> Result<Self> {
        let mut sums: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for (name, emb) in samples {
            let acc = sums.entry(name).or_insert_with(|| vec![0.0; emb.len()]);
            if acc.len() != emb.len() {
                return Err(Error::ShapeMismatch {
                    expected: format!("dimension {}", acc.len()),
                    actual: format!("dimension {}", emb.len()),
                });
            }
            for (a, e) in acc.iter_mut().zip(&emb) {
                *a += e;
            }
        }
        if sums.is_empty() {
            return Err(Error::Empty("no labeled clips to fit templates from".into()));
        }
        Self::new(sums)
    }

    pub fn get(&self, class_name: &str) -> Result<&[f64]> {
        self.templates
            .get(class_name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownClass(class_name.to_string()))
    }

    pub fn classes(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }

    pub fn dim(&self) -> usize {
        self.templates.values().next().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: BTreeMap<String, Vec<f64>> =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        Self::new(raw)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }
}

/// Mel embeddings for audio, fitted templates for class names.
#[derive(Debug, Clone)]
pub struct TemplateProvider {
    pub mel: MelEmbedder,
    pub templates: TemplateStore,
}

impl TemplateProvider {
    pub fn new(mel: MelEmbedder, templates: TemplateStore) -> Result<Self> {
        if !templates.is_empty() && templates.dim() != mel.num_bands {
            return Err(Error::ShapeMismatch {
                expected: format!("{} mel bands", mel.num_bands),
                actual: format!("templates of dimension {}", templates.dim()),
            });
        }
        Ok(Self { mel, templates })
    }
}

impl EmbeddingProvider for TemplateProvider {
    fn dim(&self) -> usize {
        self.mel.num_bands
    }

    fn embed_audio(&self, clip: &MultiChannelClip) -> Result<Vec<f64>> {
        self.mel.embed(clip)
    }

    fn embed_text(&self, class_name: &str) -> Result<Vec<f64>> {
        self.templates.get(class_name).map(<[f64]>::to_vec)
    }
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum ExternalRequest<'a> {
    AudioPath(&'a Path),
    Text(&'a str),
}

#[derive(Debug, Deserialize)]
struct ExternalResponse {
    embedding: Vec<f64>,
}

/// Delegates to an external program, one process per request.
///
/// The program receives a single JSON object on stdin, either
/// `{"audio_path": "<wav>"}` or `{"text": "<class name>"}`, and must print
/// `{"embedding": [floats]}` on stdout. Audio is handed over as a temporary
/// 32-bit float WAV that is deleted afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalProvider {
    pub program: PathBuf,
    #[serde(default)]
    pub args: Vec<String>,
    pub dim: usize,
}

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl ExternalProvider {
    fn request(&self, req: &ExternalRequest) -> Result<Vec<f64>> {
        let describe = |msg: String| Error::Unsupported(format!("embedding program {}: {msg}", self.program.display()));
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::io(&self.program, e))?;
        let body = serde_json::to_vec(req)?;
        if let Some(mut stdin) = child.stdin.take() {
            // A program that ignores stdin may close it early; its reply still counts.
            let _ = stdin.write_all(&body);
        }
        let out = child.wait_with_output().map_err(|e| Error::io(&self.program, e))?;
        if !out.status.success() {
            return Err(describe(format!(
                "exited with {}: {}",
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        let resp: ExternalResponse =
            serde_json::from_slice(&out.stdout).map_err(|e| describe(format!("bad response: {e}")))?;
        if resp.embedding.len() != self.dim {
            return Err(Error::ShapeMismatch {
                expected: format!("dimension {}", self.dim),
                actual: format!("dimension {}", resp.embedding.len()),
            });
        }
        normalized(&resp.embedding)
    }
}

impl EmbeddingProvider for ExternalProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_audio(&self, clip: &MultiChannelClip) -> Result<Vec<f64>> {
        let n = TEMP_COUNTER.fetch_add(1, Ordering::Relaxed);
        let path = std::env::temp_dir().join(format!("earsight-embed-{}-{n}.wav", std::process::id()));
        write_wav(&path, clip, WavEncoding::Float32)?;
        let result = self.request(&ExternalRequest::AudioPath(&path));
        let _ = fs::remove_file(&path);
        result
    }

    fn embed_text(&self, class_name: &str) -> Result<Vec<f64>> {
        self.request(&ExternalRequest::Text(class_name))
    }
}
