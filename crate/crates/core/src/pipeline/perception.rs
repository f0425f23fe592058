use super::machine::Perception;
use crate::classifier::{classify, Classification, ClassifierConfig, EmbeddingProvider};
use crate::direction::Direction;
use crate::error::{Error, Result};
use crate::features::phase_matrix;
use crate::features::tensor_file::PhaseMatrixMeta;
use crate::features::StftConfig;
use crate::model::{classical_doa, Checkpoint, ClassicalConfig, JerryNet, ModelParams};
use crate::sim::{ArrayGeometry, MultiChannelClip};

/// Trained network for direction, embedding scores for the class.
pub struct ModelPerception {
    net: JerryNet,
    params: ModelParams,
    features: PhaseMatrixMeta,
    provider: Box<dyn EmbeddingProvider>,
    classifier: ClassifierConfig,
}

impl ModelPerception {
    pub fn new(
        checkpoint: Checkpoint,
        provider: Box<dyn EmbeddingProvider>,
        classifier: ClassifierConfig,
    ) -> Result<Self> {
        Ok(Self {
            net: checkpoint.network()?,
            params: checkpoint.params,
            features: checkpoint.features,
            provider,
            classifier,
        })
    }
}

impl Perception for ModelPerception {
    fn direction(&mut self, clip: &MultiChannelClip) -> Result<Direction> {
        if clip.sample_rate() != self.features.sample_rate {
            return Err(Error::invalid(format!(
                "clip sample rate {} Hz differs from the model's {} Hz",
                clip.sample_rate(),
                self.features.sample_rate
            )));
        }
        let pm = phase_matrix(clip, &self.features.stft)?;
        Ok(self.net.forward(&self.params, &pm)?.argmax)
    }

    fn classify(&mut self, clip: &MultiChannelClip) -> Result<Classification> {
        classify(self.provider.as_ref(), clip, &self.classifier)
    }
}

/// Closed-form TDOA estimator for direction, embedding scores for the class.
pub struct ClassicalPerception {
    pub geometry: ArrayGeometry,
    pub stft: StftConfig,
    pub config: ClassicalConfig,
    provider: Box<dyn EmbeddingProvider>,
    classifier: ClassifierConfig,
}

impl ClassicalPerception {
    pub fn new(
        geometry: ArrayGeometry,
        stft: StftConfig,
        provider: Box<dyn EmbeddingProvider>,
        classifier: ClassifierConfig,
    ) -> Result<Self> {
        geometry.validate()?;
        stft.validate()?;
        Ok(Self {
            geometry,
            stft,
            config: ClassicalConfig::default(),
            provider,
            classifier,
        })
    }
}

impl Perception for ClassicalPerception {
    fn direction(&mut self, clip: &MultiChannelClip) -> Result<Direction> {
        Ok(classical_doa(clip, &self.geometry, &self.stft, &self.config)?.direction)
    }

    fn classify(&mut self, clip: &MultiChannelClip) -> Result<Classification> {
        classify(self.provider.as_ref(), clip, &self.classifier)
    }
}
