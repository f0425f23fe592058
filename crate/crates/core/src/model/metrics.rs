use serde::{Deserialize, Serialize};

use super::net::JerryNet;
use super::params::ModelParams;
use super::train::Sample;
use crate::direction::{Direction, NUM_DIRECTIONS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    /// Unweighted mean F1 over classes present in the truth or the predictions.
    pub macro_f1: f64,
    /// `confusion[true][predicted]`.
    pub confusion: [[usize; NUM_DIRECTIONS]; NUM_DIRECTIONS],
    pub count: usize,
}

impl Metrics {
    pub fn f1(&self, class: Direction) -> Option<f64> {
        let k = class.index();
        let tp = self.confusion[k][k];
        let fp: usize = (0..NUM_DIRECTIONS)
            .filter(|&i| i != k)
            .map(|i| self.confusion[i][k])
            .sum();
        let fn_: usize = (0..NUM_DIRECTIONS)
            .filter(|&j| j != k)
            .map(|j| self.confusion[k][j])
            .sum();
        let denom = 2 * tp + fp + fn_;
        (denom > 0).then(|| 2.0 * tp as f64 / denom as f64)
    }
}

pub fn classification_metrics(truth: &[Direction], predicted: &[Direction]) -> Result<Metrics> {
    if truth.is_empty() {
        return Err(Error::Empty("evaluation set".into()));
    }
    if truth.len() != predicted.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} predictions", truth.len()),
            actual: format!("{}", predicted.len()),
        });
    }
    let mut confusion = [[0usize; NUM_DIRECTIONS]; NUM_DIRECTIONS];
    for (t, p) in truth.iter().zip(predicted) {
        confusion[t.index()][p.index()] += 1;
    }
    let correct: usize = (0..NUM_DIRECTIONS).map(|k| confusion[k][k]).sum();
    let mut m = Metrics {
        accuracy: correct as f64 / truth.len() as f64,
        macro_f1: 0.0,
        confusion,
        count: truth.len(),
    };
    let f1s: Vec<f64> = Direction::ALL.iter().filter_map(|&d| m.f1(d)).collect();
    m.macro_f1 = f1s.iter().sum::<f64>() / f1s.len() as f64;
    Ok(m)
}

/// Accuracy, macro-F1 and confusion of `params` on a labeled set.
pub fn evaluate(net: &JerryNet, params: &ModelParams, dataset: &[Sample]) -> Result<Metrics> {
    if dataset.is_empty() {
        return Err(Error::Empty("evaluation set".into()));
    }
    let mut predicted = Vec::with_capacity(dataset.len());
    for s in dataset {
        predicted.push(net.forward(params, &s.input)?.argmax);
    }
    let truth: Vec<Direction> = dataset.iter().map(|s| s.label).collect();
    classification_metrics(&truth, &predicted)
}
