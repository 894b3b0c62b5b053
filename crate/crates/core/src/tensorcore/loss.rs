use super::tensor::TensorND;
use crate::error::{invalid, shape_err, Result};

/// Probabilities are clamped to `[BCE_EPS, 1 - BCE_EPS]` before taking logs.
pub const BCE_EPS: f64 = 1e-7;

/// Mean squared error and its gradient with respect to `prediction`.
pub fn mse_loss(prediction: &TensorND, target: &TensorND) -> Result<(f64, TensorND)> {
    if prediction.shape() != target.shape() {
        return Err(shape_err!(
            "mse_loss prediction {:?} vs target {:?}",
            prediction.shape(),
            target.shape()
        ));
    }
    let n = prediction.len() as f64;
    let mut grad = TensorND::zeros(prediction.shape());
    let mut loss = 0.0;
    for ((g, p), t) in grad.data_mut().iter_mut().zip(prediction.data()).zip(target.data()) {
        let d = p - t;
        loss += d * d;
        *g = 2.0 * d / n;
    }
    Ok((loss / n, grad))
}

fn check_label(y: f64) -> Result<()> {
    if y != 0.0 && y != 1.0 {
        return Err(invalid!("binary label must be 0 or 1, got {y}"));
    }
    Ok(())
}

/// Binary cross-entropy of a single probability and its derivative with
/// respect to that probability.
pub fn bce_loss(p: f64, y: f64) -> Result<(f64, f64)> {
    check_label(y)?;
    let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
    let loss = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
    let grad = -y / p + (1.0 - y) / (1.0 - p);
    Ok((loss, grad))
}

/// Mean binary cross-entropy over a batch.
pub fn bce_mean(probs: &[f64], labels: &[f64]) -> Result<f64> {
    if probs.len() != labels.len() || probs.is_empty() {
        return Err(shape_err!(
            "bce over {} probabilities and {} labels",
            probs.len(),
            labels.len()
        ));
    }
    let mut total = 0.0;
    for (&p, &y) in probs.iter().zip(labels) {
        total += bce_loss(p, y)?.0;
    }
    Ok(total / probs.len() as f64)
}
