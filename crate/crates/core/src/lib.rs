//! Sound localization and alerting for a head-worn four-microphone array.
//!
//! The crate covers the whole device cycle:
//!
//! - [`sim`]: synthetic four-channel clips for the nine direction classes
//! - [`features`]: STFT and interchannel phase differences (the phase matrix)
//! - [`model`]: a from-scratch CNN over the phase matrix, plus a classical
//!   cross-spectrum direction estimator used as an independent check
//! - [`classifier`]: embedding-based class scoring and the priority filter
//! - [`fusion`]: localization-map thresholding and bounding-box selection
//! - [`pipeline`]: the single-cycle device state machine
//! - [`stats`]: one-way ANOVA and Tukey HSD for comparing runs
//! - [`config`]: the TOML run configuration shared by every command

pub mod classifier;
pub mod config;
pub mod direction;
pub mod error;
pub mod features;
pub mod fusion;
pub mod model;
pub mod pipeline;
pub mod seed;
pub mod sim;
pub mod stats;

pub use direction::{Direction, NUM_DIRECTIONS};
pub use error::{Error, Result};
