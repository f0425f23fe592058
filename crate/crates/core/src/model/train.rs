//! Mini-batch SGD over phase matrices.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::net::{JerryNet, Tensor};
use super::params::ModelParams;
use crate::direction::{Direction, NUM_DIRECTIONS};
use crate::error::{Error, Result};
use crate::features::PhaseMatrix;
use crate::seed::{derive_indexed, derive_seed, rng};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: PhaseMatrix,
    pub label: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Augmentation {
    /// Standard deviation of Gaussian noise added to IPD entries, radians.
    pub noise_std: f64,
    /// Maximum number of leading frames cropped (the tail is zero padded).
    pub time_jitter: usize,
}

impl Default for Augmentation {
    fn default() -> Self {
        Self {
            noise_std: 0.05,
            time_jitter: 8,
        }
    }
}

impl Augmentation {
    pub fn none() -> Self {
        Self {
            noise_std: 0.0,
            time_jitter: 0,
        }
    }

    /// Applies crop-and-pad then noise. Time is the last axis in both layouts.
    fn apply<R: Rng>(&self, x: &mut Tensor, rng: &mut R) {
        let frames = x.shape[2];
        if self.time_jitter > 0 && frames > 1 {
            let shift = rng.random_range(0..=self.time_jitter.min(frames - 1));
            if shift > 0 {
                for row in x.data.chunks_exact_mut(frames) {
                    row.copy_within(shift.., 0);
                    row[frames - shift..].fill(0.0);
                }
            }
        }
        if self.noise_std > 0.0 {
            let normal = Normal::new(0.0, self.noise_std).expect("finite positive std");
            for v in x.data.iter_mut() {
                *v += normal.sample(rng);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightInit {
    /// He-uniform everywhere.
    HeUniform,
    /// He-uniform, except the output layer starts at zero so the first
    /// predictions are uniform instead of saturated.
    #[default]
    HeUniformZeroOutput,
}

impl WeightInit {
    pub fn init(self, net: &JerryNet, seed: u64) -> ModelParams {
        let mut params = net.init_params(seed);
        if self == WeightInit::HeUniformZeroOutput {
            let n = params.tensors.len();
            params.tensors[n - 2].data.fill(0.0);
        }
        params
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Classical momentum; 0 is plain SGD.
    pub momentum: f64,
    /// Fraction of each class held out for validation.
    pub val_fraction: f64,
    pub augmentation: Augmentation,
    pub weight_init: WeightInit,
    /// Rescales each batch gradient to at most this global L2 norm.
    pub clip_grad_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            batch_size: 16,
            epochs: 20,
            seed: 0,
            momentum: 0.9,
            val_fraction: 0.2,
            augmentation: Augmentation::default(),
            weight_init: WeightInit::default(),
            clip_grad_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::invalid("learning rate must be finite and non-negative"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::invalid("validation fraction must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum must lie in [0, 1)"));
        }
        if self.clip_grad_norm.is_some_and(|c| !(c.is_finite() && c > 0.0)) {
            return Err(Error::invalid("gradient clip norm must be positive"));
        }
        if !(self.augmentation.noise_std.is_finite() && self.augmentation.noise_std >= 0.0) {
            return Err(Error::invalid("augmentation noise must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_acc: f64,
    pub val_acc: Option<f64>,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
}

impl History {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        let mut out = String::from("epoch,train_acc,val_acc,train_loss,val_loss\n");
        for r in &self.epochs {
            let _ = writeln!(
                out,
                "{},{:.6},{},{:.6},{}",
                r.epoch,
                r.train_acc,
                opt(r.val_acc),
                r.train_loss,
                opt(r.val_loss)
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }
}

/// Per-class shuffled split; each class with n items contributes
/// round(n · val_fraction) to validation, never all of them.
pub fn stratified_split(labels: &[Direction], val_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut r = rng(derive_seed(seed, "split"));
    let mut train = Vec::new();
    let mut val = Vec::new();
    for class in Direction::ALL {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut r);
        let n_val = ((idx.len() as f64 * val_fraction).round() as usize).min(idx.len().saturating_sub(1));
        val.extend_from_slice(&idx[..n_val]);
        train.extend_from_slice(&idx[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// Trains from freshly initialized weights.
pub fn train(net: &JerryNet, dataset: &[Sample], cfg: &TrainConfig) -> Result<(ModelParams, History)> {
    let params = cfg.weight_init.init(net, derive_seed(cfg.seed, "init"));
    train_from(net, params, dataset, cfg)
}

/// Shuffled mini-batch SGD from the given starting point. Batch gradients are
/// accumulated in sample order so runs are reproducible.
pub fn train_from(
    net: &JerryNet,
    mut params: ModelParams,
    dataset: &[Sample],
    cfg: &TrainConfig,
) -> Result<(ModelParams, History)> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    let labels: Vec<Direction> = dataset.iter().map(|s| s.label).collect();
    let (mut train_idx, val_idx) = stratified_split(&labels, cfg.val_fraction, cfg.seed);
    let inputs = dataset
        .iter()
        .map(|s| net.tensor_from(&s.input))
        .collect::<Result<Vec<_>>>()?;

    let mut velocity = (cfg.momentum > 0.0).then(|| params.zeros_like());
    let mut history = History::default();
    for epoch in 0..cfg.epochs {
        let mut epoch_rng = rng(derive_indexed(cfg.seed, "epoch", epoch as u64));
        train_idx.shuffle(&mut epoch_rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for (b, batch) in train_idx.chunks(cfg.batch_size).enumerate() {
            let mut grad: Option<ModelParams> = None;
            for &i in batch {
                let mut x = inputs[i].clone();
                cfg.augmentation.apply(&mut x, &mut epoch_rng);
                let (loss, g, pred) = net.backward_tensor(&params, x, dataset[i].label)?;
                if !loss.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "loss {loss} at epoch {epoch}, batch {b}, sample {i}"
                    )));
                }
                loss_sum += loss;
                correct += usize::from(pred.argmax == dataset[i].label);
                match grad.as_mut() {
                    Some(acc) => acc.add_scaled(&g, 1.0),
                    None => grad = Some(g),
                }
            }
            let mut grad = grad.expect("chunks are non-empty");
            grad.scale(1.0 / batch.len() as f64);
            if let Some(max_norm) = cfg.clip_grad_norm {
                let norm = grad.iter_flat().map(|g| g * g).sum::<f64>().sqrt();
                if norm > max_norm {
                    grad.scale(max_norm / norm);
                }
            }
            match velocity.as_mut() {
                Some(v) => {
                    v.scale(cfg.momentum);
                    v.add_scaled(&grad, 1.0);
                    params.add_scaled(v, -cfg.learning_rate);
                }
                None => params.add_scaled(&grad, -cfg.learning_rate),
            }
        }
        if !params.all_finite() {
            return Err(Error::NonFinite(format!("parameters after epoch {epoch}")));
        }
        let (val_acc, val_loss) = if val_idx.is_empty() {
            (None, None)
        } else {
            let (acc, loss) = score(net, &params, &inputs, dataset, &val_idx)?;
            (Some(acc), Some(loss))
        };
        let n = train_idx.len() as f64;
        history.epochs.push(EpochRecord {
            epoch: epoch + 1,
            train_acc: correct as f64 / n,
            val_acc,
            train_loss: loss_sum / n,
            val_loss,
        });
    }
    Ok((params, history))
}

fn score(
    net: &JerryNet,
    params: &ModelParams,
    inputs: &[Tensor],
    dataset: &[Sample],
    idx: &[usize],
) -> Result<(f64, f64)> {
    let mut correct = 0usize;
    let mut loss = 0.0;
    for &i in idx {
        loss += net.loss_tensor(params, inputs[i].clone(), dataset[i].label)?;
        correct += usize::from(net.forward_tensor(params, inputs[i].clone())?.argmax == dataset[i].label);
    }
    Ok((correct as f64 / idx.len() as f64, loss / idx.len() as f64))
}

/// Class histogram, indexed like the network outputs.
pub fn class_counts(labels: &[Direction]) -> [usize; NUM_DIRECTIONS] {
    let mut counts = [0; NUM_DIRECTIONS];
    for l in labels {
        counts[l.index()] += 1;
    }
    counts
}
