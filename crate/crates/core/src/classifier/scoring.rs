use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TEMPERATURE: f64 = 0.07;
pub const DEFAULT_THRESHOLD: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub class_name: String,
    pub prob: f64,
}

impl ClassScore {
    pub fn new(class_name: impl Into<String>, prob: f64) -> Self {
        Self {
            class_name: class_name.into(),
            prob,
        }
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn normalized(v: &[f64]) -> Result<Vec<f64>> {
    let n = norm(v);
    if !(n.is_finite() && n > 0.0) {
        return Err(Error::invalid("embedding has zero or non-finite norm"));
    }
    Ok(v.iter().map(|x| x / n).collect())
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("dimension {}", a.len()),
            actual: format!("dimension {}", b.len()),
        });
    }
    let (a, b) = (normalized(a)?, normalized(b)?);
    Ok(a.iter().zip(&b).map(|(x, y)| x * y).sum())
}

/// Softmax over cosine similarities divided by `temperature`.
pub fn zero_shot_scores(audio: &[f64], classes: &[(String, Vec<f64>)], temperature: f64) -> Result<Vec<ClassScore>> {
    if classes.is_empty() {
        return Err(Error::Empty("class list".into()));
    }
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::invalid(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let logits = classes
        .iter()
        .map(|(_, emb)| cosine(audio, emb).map(|c| c / temperature))
        .collect::<Result<Vec<_>>>()?;
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(classes
        .iter()
        .zip(exps)
        .map(|((name, _), e)| ClassScore::new(name.clone(), e / sum))
        .collect())
}

/// Class names from most to least urgent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct PriorityList {
    classes: Vec<String>,
}

impl PriorityList {
    pub fn new(classes: Vec<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &classes {
            if !seen.insert(c.as_str()) {
                return Err(Error::invalid(format!("duplicate class `{c}` in priority list")));
            }
        }
        Ok(Self { classes })
    }

    /// 1-based rank, `None` for unlisted classes (ranked after every listed one).
    pub fn rank(&self, class: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == class).map(|i| i + 1)
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }
}

impl Default for PriorityList {
    fn default() -> Self {
        Self {
            classes: DEFAULT_VOCABULARY.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl TryFrom<Vec<String>> for PriorityList {
    type Error = Error;

    fn try_from(v: Vec<String>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<PriorityList> for Vec<String> {
    fn from(p: PriorityList) -> Self {
        p.classes
    }
}

/// The eight priority classes, most urgent first.
pub const DEFAULT_VOCABULARY: [&str; 8] = [
    "siren",
    "car honking",
    "bike bell",
    "person talking",
    "doorbell",
    "phone ringing",
    "dog barking",
    "instruments",
];

/// Picks the class to announce: among classes scoring strictly above
/// `threshold`, the best-ranked one; ties on rank go to the higher
/// probability, then to the lexicographically smaller name.
pub fn importance_filter(scores: &[ClassScore], priority: &PriorityList, threshold: f64) -> Option<String> {
    let key = |s: &ClassScore| priority.rank(&s.class_name).unwrap_or(usize::MAX);
    scores
        .iter()
        .filter(|s| s.prob > threshold)
        .min_by(|a, b| {
            key(a)
                .cmp(&key(b))
                .then_with(|| b.prob.partial_cmp(&a.prob).unwrap_or(Ordering::Equal))
                .then_with(|| a.class_name.cmp(&b.class_name))
        })
        .map(|s| s.class_name.clone())
}
