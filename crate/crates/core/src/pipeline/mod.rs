//! The device cycle: loudness gate, direction and class, alert, image, box.

pub mod events;
mod machine;
mod perception;

pub use events::{load_event, read_frame, read_script, replay_script, EventKind, FrameDescriptor, ScriptLine};
pub use machine::{
    alert_text, rms_db, CycleMachine, CycleState, DisplayMessage, Event, ImageFrame, LoopConfig, MessageKind,
    Perception, Record, RecordBody,
};
pub use perception::{ClassicalPerception, ModelPerception};
