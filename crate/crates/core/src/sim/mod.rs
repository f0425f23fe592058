//! Synthetic four-microphone recordings for the nine direction classes.

mod geometry;
pub mod io;
mod source;
mod synth;

pub use geometry::{ArrayGeometry, Point3};
pub use source::{fractional_delay, SignalKind, SourceSpec, SELF_MAX_DISTANCE_M};
pub use synth::{
    amplify_differences, default_sounds, make_dataset, make_dataset_with, synth_clip, MultiChannelClip, SimConfig,
    SimulatedClip, SoundPreset, MIN_SAMPLE_RATE, NUM_MICS, SELF_SOUND,
};
