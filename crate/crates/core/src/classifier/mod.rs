//! Embedding-based class scoring and the importance filter.

mod embedding;
mod scoring;

pub use embedding::{
    hz_to_mel, mel_to_hz, EmbeddingProvider, ExternalProvider, MelEmbedder, TemplateProvider, TemplateStore,
};
pub use scoring::{
    cosine, importance_filter, zero_shot_scores, ClassScore, PriorityList, DEFAULT_TEMPERATURE, DEFAULT_THRESHOLD,
    DEFAULT_VOCABULARY,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::MultiChannelClip;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    /// Classes scored against each clip.
    pub vocabulary: Vec<String>,
    pub temperature: f64,
    /// Classes must score strictly above this to be announced.
    pub threshold: f64,
    pub priority: PriorityList,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            vocabulary: DEFAULT_VOCABULARY.iter().map(|s| s.to_string()).collect(),
            temperature: DEFAULT_TEMPERATURE,
            threshold: DEFAULT_THRESHOLD,
            priority: PriorityList::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub scores: Vec<ClassScore>,
    pub selected: Option<String>,
}

/// Scores `clip` against every vocabulary class the provider knows and applies
/// the filter. Classes the provider reports as unknown are left out.
pub fn classify(
    provider: &dyn EmbeddingProvider,
    clip: &MultiChannelClip,
    cfg: &ClassifierConfig,
) -> Result<Classification> {
    let audio = provider.embed_audio(clip)?;
    let mut classes = Vec::with_capacity(cfg.vocabulary.len());
    for c in &cfg.vocabulary {
        match provider.embed_text(c) {
            Ok(e) => classes.push((c.clone(), e)),
            Err(Error::UnknownClass(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if classes.is_empty() {
        return Err(Error::Empty(
            "no vocabulary class is known to the embedding provider".into(),
        ));
    }
    let scores = zero_shot_scores(&audio, &classes, cfg.temperature)?;
    let selected = importance_filter(&scores, &cfg.priority, cfg.threshold);
    Ok(Classification { scores, selected })
}
