//! The direction CNN, its training loop, checkpoints, metrics, and a classical
//! cross-spectrum estimator used as an independent reference.

pub mod checkpoint;
pub mod classical;
mod config;
pub mod loss;
mod metrics;
mod net;
mod params;
mod train;

pub use checkpoint::Checkpoint;
pub use classical::{classical_doa, fit_slowness, ClassicalConfig, ClassicalEstimate, SlownessFit};
pub use config::{BlockSpec, InputLayout, JerryNetConfig, LossKind, Shape3};
pub use loss::bce_loss;
pub use metrics::{classification_metrics, evaluate, Metrics};
pub use net::{JerryNet, Prediction, Tensor};
pub use params::{ModelParams, ParamTensor};
pub use train::{
    class_counts, stratified_split, train, train_from, Augmentation, EpochRecord, History, Sample, TrainConfig,
    WeightInit,
};
