//! Time-frequency features: STFT and the interchannel phase-difference matrix.

pub mod dataset;
mod phase;
mod stft;
pub mod tensor_file;

pub use dataset::{featurize_dir, load_samples, FeatureEntry, FeatureIndex, FeaturizeReport};
pub use phase::{ipd, phase_matrix, wrap_phase, IpdMap, PhaseMatrix, NUM_PAIRS, ZERO_MAGNITUDE};
pub use stft::{stft, Spectrogram, StftConfig, WindowFn};
