//! Box selection from a localization map and detector candidates.

mod bbox;
mod map;
mod select;

pub use bbox::{iou, BBox};
pub use map::{pseudo_bbox, threshold_map, BinaryGrid, LocalizationMap};
pub use select::{
    dataset_metrics, metrics_from_ious, select_box, Candidate, CandidateSet, DoaGate, LocMetrics, SelectionResult,
    CURVE_STEPS, DEFAULT_TAU,
};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    /// Map cells strictly above this are positive.
    pub tau: f64,
    pub gate: DoaGate,
    /// IoU at or above this counts as a localization success.
    pub success_iou: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            gate: DoaGate::default(),
            success_iou: 0.5,
        }
    }
}
