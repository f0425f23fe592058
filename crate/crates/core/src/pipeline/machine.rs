use serde::{Deserialize, Serialize};

use crate::classifier::Classification;
use crate::direction::Direction;
use crate::error::Result;
use crate::fusion::{select_box, CandidateSet, FusionConfig, LocalizationMap, SelectionResult};
use crate::sim::MultiChannelClip;

/// Level of the channel-mean signal in dB: 20·log10(rms) + `calibration_offset_db`.
/// An all-zero clip gives −∞.
pub fn rms_db(clip: &MultiChannelClip, calibration_offset_db: f64) -> f64 {
    let mono = clip.mono();
    let ms = mono.iter().map(|v| v * v).sum::<f64>() / mono.len().max(1) as f64;
    if ms == 0.0 {
        return f64::NEG_INFINITY;
    }
    10.0 * ms.log10() + calibration_offset_db
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopConfig {
    /// Windows below this level (dB) never start a cycle.
    pub gate_db: f64,
    /// Added to digital dBFS to get the device's dB scale.
    pub calibration_offset_db: f64,
    /// Logical seconds to wait for the camera before giving up; `None` waits forever.
    pub image_timeout_s: Option<f64>,
    /// Announce sounds attributed to the wearer's own voice.
    pub alert_on_self: bool,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            gate_db: 60.0,
            calibration_offset_db: 94.0,
            image_timeout_s: Some(10.0),
            alert_on_self: false,
        }
    }
}

/// Direction finding and sound classification for one audio window.
pub trait Perception {
    fn direction(&mut self, clip: &MultiChannelClip) -> Result<Direction>;
    fn classify(&mut self, clip: &MultiChannelClip) -> Result<Classification>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageFrame {
    pub candidates: CandidateSet,
    pub map: LocalizationMap,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    AudioWindow(MultiChannelClip),
    Image(ImageFrame),
    Reset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum CycleState {
    Idle,
    Gated,
    AwaitTurn {
        direction: Direction,
        class: String,
    },
    AwaitImage {
        direction: Direction,
        class: String,
        since: f64,
    },
    Done {
        result: Box<SelectionResult>,
    },
}

impl CycleState {
    pub fn name(&self) -> &'static str {
        match self {
            CycleState::Idle => "idle",
            CycleState::Gated => "gated",
            CycleState::AwaitTurn { .. } => "await_turn",
            CycleState::AwaitImage { .. } => "await_image",
            CycleState::Done { .. } => "done",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    DirectionAlert,
    BoxResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplayMessage {
    pub kind: MessageKind,
    pub text: String,
}

pub fn alert_text(class: &str, direction: Direction) -> String {
    format!("There is a {class} in the {}", direction.label())
}

/// One line of loop output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycle_id: Option<u64>,
    #[serde(flatten)]
    pub body: RecordBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RecordBody {
    Transition {
        from: String,
        to: String,
    },
    Message(DisplayMessage),
    CameraRequest,
    Selection {
        result: SelectionResult,
    },
    /// An event that was ignored, with the reason.
    Dropped {
        reason: String,
    },
    Diagnostic {
        message: String,
    },
}

/// The device cycle. At most one cycle is active; audio arriving while a cycle
/// waits for its image is dropped.
#[derive(Debug, Clone)]
pub struct CycleMachine {
    state: CycleState,
    cycle_id: u64,
    cfg: LoopConfig,
    fusion: FusionConfig,
}

impl CycleMachine {
    pub fn new(cfg: LoopConfig, fusion: FusionConfig) -> Self {
        Self {
            state: CycleState::Idle,
            cycle_id: 0,
            cfg,
            fusion,
        }
    }

    pub fn state(&self) -> &CycleState {
        &self.state
    }

    /// Id of the current or most recent cycle; 0 before the first one.
    pub fn cycle_id(&self) -> u64 {
        self.cycle_id
    }

    pub fn config(&self) -> &LoopConfig {
        &self.cfg
    }

    pub fn is_active(&self) -> bool {
        !matches!(self.state, CycleState::Idle)
    }

    /// Applies one event at logical time `t` and returns what it produced.
    pub fn step(&mut self, t: f64, event: Event, perception: &mut dyn Perception) -> Vec<Record> {
        let mut out = Vec::new();
        self.expire(t, &mut out);
        match event {
            Event::Reset => {
                if self.is_active() {
                    self.go(t, CycleState::Idle, &mut out);
                }
            }
            Event::AudioWindow(clip) => match self.state {
                CycleState::Idle => self.start(t, &clip, perception, &mut out),
                _ => out.push(self.record(
                    t,
                    RecordBody::Dropped {
                        reason: format!("audio window during {}", self.state.name()),
                    },
                )),
            },
            Event::Image(frame) => match &self.state {
                CycleState::AwaitImage { direction, .. } => {
                    let doa = Some(*direction);
                    let f = &self.fusion;
                    match select_box(&frame.candidates, &frame.map, f.tau, doa, &f.gate) {
                        Ok(result) => {
                            let text = format!(
                                "{} at x={} y={} w={} h={} (IoU {:.3})",
                                result.chosen.class,
                                result.chosen.bbox.x,
                                result.chosen.bbox.y,
                                result.chosen.bbox.w,
                                result.chosen.bbox.h,
                                result.iou
                            );
                            out.push(self.record(t, RecordBody::Selection { result: result.clone() }));
                            out.push(self.record(
                                t,
                                RecordBody::Message(DisplayMessage {
                                    kind: MessageKind::BoxResult,
                                    text,
                                }),
                            ));
                            self.go(
                                t,
                                CycleState::Done {
                                    result: Box::new(result),
                                },
                                &mut out,
                            );
                        }
                        Err(e) => out.push(self.record(
                            t,
                            RecordBody::Diagnostic {
                                message: format!("fusion: {e}"),
                            },
                        )),
                    }
                    self.go(t, CycleState::Idle, &mut out);
                }
                _ => out.push(self.record(
                    t,
                    RecordBody::Dropped {
                        reason: format!("image during {}", self.state.name()),
                    },
                )),
            },
        }
        out
    }

    fn start(&mut self, t: f64, clip: &MultiChannelClip, perception: &mut dyn Perception, out: &mut Vec<Record>) {
        let db = rms_db(clip, self.cfg.calibration_offset_db);
        if !(db >= self.cfg.gate_db) {
            out.push(Record {
                t,
                cycle_id: None,
                body: RecordBody::Dropped {
                    reason: format!("level {db:.1} dB below gate {:.1} dB", self.cfg.gate_db),
                },
            });
            return;
        }
        self.cycle_id += 1;
        self.go(t, CycleState::Gated, out);
        let outcome = perception
            .direction(clip)
            .and_then(|d| perception.classify(clip).map(|c| (d, c)));
        let (direction, classification) = match outcome {
            Ok(v) => v,
            Err(e) => {
                out.push(self.record(
                    t,
                    RecordBody::Diagnostic {
                        message: format!("perception: {e}"),
                    },
                ));
                return self.go(t, CycleState::Idle, out);
            }
        };
        let Some(class) = classification.selected else {
            out.push(self.record(
                t,
                RecordBody::Dropped {
                    reason: "no class above the importance threshold".into(),
                },
            ));
            return self.go(t, CycleState::Idle, out);
        };
        if direction == Direction::SelfVoice && !self.cfg.alert_on_self {
            out.push(self.record(
                t,
                RecordBody::Dropped {
                    reason: "sound attributed to the wearer".into(),
                },
            ));
            return self.go(t, CycleState::Idle, out);
        }
        out.push(self.record(
            t,
            RecordBody::Message(DisplayMessage {
                kind: MessageKind::DirectionAlert,
                text: alert_text(&class, direction),
            }),
        ));
        self.go(
            t,
            CycleState::AwaitTurn {
                direction,
                class: class.clone(),
            },
            out,
        );
        out.push(self.record(t, RecordBody::CameraRequest));
        self.go(
            t,
            CycleState::AwaitImage {
                direction,
                class,
                since: t,
            },
            out,
        );
    }

    fn expire(&mut self, t: f64, out: &mut Vec<Record>) {
        if let (CycleState::AwaitImage { since, .. }, Some(limit)) = (&self.state, self.cfg.image_timeout_s) {
            if t - since > limit {
                out.push(self.record(
                    t,
                    RecordBody::Diagnostic {
                        message: format!("no image within {limit} s"),
                    },
                ));
                self.go(t, CycleState::Idle, out);
            }
        }
    }

    fn go(&mut self, t: f64, next: CycleState, out: &mut Vec<Record>) {
        let from = self.state.name().to_string();
        let to = next.name().to_string();
        self.state = next;
        out.push(self.record(t, RecordBody::Transition { from, to }));
    }

    fn record(&self, t: f64, body: RecordBody) -> Record {
        Record {
            t,
            cycle_id: Some(self.cycle_id).filter(|&id| id > 0),
            body,
        }
    }
}
