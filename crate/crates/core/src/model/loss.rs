use super::config::LossKind;
use super::net::Prediction;
use crate::direction::Direction;

/// Probabilities are clamped to [CLAMP, 1 − CLAMP] before taking logs in BCE.
pub const CLAMP: f64 = 1e-7;

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Binary cross-entropy over the softmax outputs with a one-hot target,
/// averaged over the classes.
pub fn bce_loss(probs: &[f64], label: Direction) -> f64 {
    let k = probs.len() as f64;
    let total: f64 = probs
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let p = p.clamp(CLAMP, 1.0 - CLAMP);
            if i == label.index() {
                p.ln()
            } else {
                (1.0 - p).ln()
            }
        })
        .sum();
    -total / k
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln()
}

/// Loss and ∂L/∂logits for one prediction.
pub fn loss_and_logit_grad(kind: LossKind, pred: &Prediction, label: Direction) -> (f64, Vec<f64>) {
    let p = &pred.probs;
    let y = label.index();
    match kind {
        LossKind::SoftmaxBce => {
            let k = p.len() as f64;
            // ∂L/∂p_i; zero where the clamp is active.
            let dp: Vec<f64> = p
                .iter()
                .enumerate()
                .map(|(i, &pi)| {
                    if !(CLAMP..=1.0 - CLAMP).contains(&pi) {
                        0.0
                    } else if i == y {
                        -1.0 / (k * pi)
                    } else {
                        1.0 / (k * (1.0 - pi))
                    }
                })
                .collect();
            (bce_loss(p, label), softmax_vjp(p, &dp))
        }
        LossKind::CrossEntropy => {
            let loss = log_sum_exp(&pred.logits) - pred.logits[y];
            let grad = p
                .iter()
                .enumerate()
                .map(|(i, &pi)| if i == y { pi - 1.0 } else { pi })
                .collect();
            (loss, grad)
        }
    }
}

/// Jacobian-transpose product of softmax: dz_j = p_j (g_j − Σ_k g_k p_k).
pub fn softmax_vjp(probs: &[f64], grad_probs: &[f64]) -> Vec<f64> {
    let dot: f64 = probs.iter().zip(grad_probs).map(|(p, g)| p * g).sum();
    probs.iter().zip(grad_probs).map(|(p, g)| p * (g - dot)).collect()
}
