use std::cmp::Ordering;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bbox::{iou, BBox};
use super::map::{pseudo_bbox, threshold_map, LocalizationMap};
use crate::direction::Direction;
use crate::error::{Error, Result};

pub const DEFAULT_TAU: f64 = 0.5;

/// A detector box, serialized as one flat JSON object
/// `{"class", "confidence", "x", "y", "w", "h"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub class: String,
    pub confidence: f64,
    #[serde(flatten)]
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub boxes: Vec<Candidate>,
    pub image_width: u32,
    pub image_height: u32,
}

impl CandidateSet {
    pub fn new(boxes: Vec<Candidate>, image_width: u32, image_height: u32) -> Result<Self> {
        if image_width == 0 || image_height == 0 {
            return Err(Error::invalid("image size must be positive"));
        }
        for c in &boxes {
            if !c.bbox.fits_in(image_width, image_height) {
                return Err(Error::invalid(format!(
                    "box {:?} lies outside the {image_width}x{image_height} image",
                    c.bbox
                )));
            }
            if !c.confidence.is_finite() {
                return Err(Error::NonFinite(format!("confidence of `{}` box", c.class)));
            }
        }
        Ok(Self {
            boxes,
            image_width,
            image_height,
        })
    }

    /// Parses JSON lines, skipping blank lines.
    pub fn parse_jsonl(text: &str, path: &Path) -> Result<Vec<Candidate>> {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::format(path, format!("line {}: {e}", i + 1))))
            .collect()
    }

    pub fn read_jsonl(path: &Path) -> Result<Vec<Candidate>> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_jsonl(&text, path)
    }
}

/// Keeps candidates whose horizontal center lies within a band of the image
/// width. Applies only when a direction is known, since the wearer has then
/// turned to face the sound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DoaGate {
    pub enabled: bool,
    /// Band edges as fractions of the image width, inclusive.
    pub band: (f64, f64),
}

impl Default for DoaGate {
    fn default() -> Self {
        Self {
            enabled: false,
            band: (1.0 / 3.0, 2.0 / 3.0),
        }
    }
}

impl DoaGate {
    pub fn admits(&self, bbox: &BBox, image_width: u32, doa: Option<Direction>) -> bool {
        if !self.enabled || doa.is_none() {
            return true;
        }
        let w = f64::from(image_width);
        let cx = bbox.center_x();
        cx >= self.band.0 * w && cx <= self.band.1 * w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub chosen: Candidate,
    /// Position of `chosen` in the input list.
    pub index: usize,
    pub iou: f64,
    pub pseudo_box: BBox,
}

/// Thresholds the map, takes the tight box around it and returns the
/// candidate overlapping it most. Ties go to higher confidence, then to the
/// smaller x, then to the earlier candidate.
pub fn select_box(
    cands: &CandidateSet,
    map: &LocalizationMap,
    tau: f64,
    doa: Option<Direction>,
    gate: &DoaGate,
) -> Result<SelectionResult> {
    if cands.boxes.is_empty() {
        return Err(Error::Empty("candidate set".into()));
    }
    let map = map.resize_nearest(cands.image_width as usize, cands.image_height as usize)?;
    let pseudo_box = pseudo_bbox(&threshold_map(&map, tau)).ok_or(Error::NoLocalizedRegion)?;
    let best = cands
        .boxes
        .iter()
        .enumerate()
        .filter(|(_, c)| gate.admits(&c.bbox, cands.image_width, doa))
        .map(|(i, c)| (i, c, iou(&c.bbox, &pseudo_box)))
        .min_by(|(ia, a, ua), (ib, b, ub)| {
            ub.partial_cmp(ua)
                .unwrap_or(Ordering::Equal)
                .then_with(|| b.confidence.partial_cmp(&a.confidence).unwrap_or(Ordering::Equal))
                .then_with(|| a.bbox.x.cmp(&b.bbox.x))
                .then_with(|| ia.cmp(ib))
        })
        .ok_or(Error::GateEliminatedAll)?;
    Ok(SelectionResult {
        chosen: best.1.clone(),
        index: best.0,
        iou: best.2,
        pseudo_box,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocMetrics {
    /// Fraction of samples with IoU at or above the success threshold.
    pub ciou_rate: f64,
    /// Trapezoidal area under the success-rate curve.
    pub auc: f64,
    /// `(threshold, success rate)` at thresholds 0, 0.05, ..., 1.
    pub curve: Vec<(f64, f64)>,
    pub count: usize,
}

pub const CURVE_STEPS: usize = 20;

/// Success-rate metrics over `(pseudo box, ground truth)` pairs. A missing
/// pseudo box counts as IoU 0.
pub fn dataset_metrics(pairs: &[(Option<BBox>, BBox)], success_threshold: f64) -> Result<LocMetrics> {
    let ious: Vec<f64> = pairs
        .iter()
        .map(|(p, gt)| p.as_ref().map_or(0.0, |p| iou(p, gt)))
        .collect();
    metrics_from_ious(&ious, success_threshold)
}

pub fn metrics_from_ious(ious: &[f64], success_threshold: f64) -> Result<LocMetrics> {
    if ious.is_empty() {
        return Err(Error::Empty("no samples for localization metrics".into()));
    }
    let n = ious.len() as f64;
    let rate = |t: f64| ious.iter().filter(|&&v| v >= t).count() as f64 / n;
    let curve: Vec<(f64, f64)> = (0..=CURVE_STEPS)
        .map(|i| {
            let t = i as f64 / CURVE_STEPS as f64;
            (t, rate(t))
        })
        .collect();
    let auc = curve
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum();
    Ok(LocMetrics {
        ciou_rate: rate(success_threshold),
        auc,
        curve,
        count: ious.len(),
    })
}
