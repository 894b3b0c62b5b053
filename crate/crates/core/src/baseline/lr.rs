use serde::{Deserialize, Serialize};

use crate::dataio::Label;
use crate::error::{shape_err, PadError, Result};
use crate::tensorcore::{sigmoid, BCE_EPS};

pub const LR_L2: f64 = 1e-4;
pub const LR_TOL: f64 = 1e-7;
pub const LR_MAX_ITER: usize = 1000;
const LR_INITIAL_STEP: f64 = 1.0;
const LR_MIN_STEP: f64 = 1e-12;

/// Per-dimension standardization fitted on bona-fide rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZNorm {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ZNorm {
    /// Fits on `rows`. Zero-variance dimensions get a unit std.
    pub fn fit(rows: &[&[f64]]) -> Result<Self> {
        let first = rows.first().ok_or_else(|| PadError::Validation("z-norm needs at least one row".into()))?;
        let d = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(ZNorm { mean, std })
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub znorm: ZNorm,
}

impl LrModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    fn logit_z(&self, z: &[f64]) -> f64 {
        self.weights.iter().zip(z).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    /// P(attack) for a raw feature vector.
    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.dim() {
            return Err(shape_err!("LR expects {} features, got {}", self.dim(), features.len()));
        }
        Ok(sigmoid(self.logit_z(&self.znorm.apply(features))))
    }
}

fn objective(w: &[f64], b: f64, z: &[Vec<f64>], y: &[f64]) -> f64 {
    let n = z.len() as f64;
    let data: f64 = z
        .iter()
        .zip(y)
        .map(|(row, &t)| {
            let p = sigmoid(w.iter().zip(row).map(|(a, v)| a * v).sum::<f64>() + b).clamp(BCE_EPS, 1.0 - BCE_EPS);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / n;
    data + 0.5 * LR_L2 * w.iter().map(|v| v * v).sum::<f64>()
}

/// Trains a logistic regression; also returns the objective after every
/// accepted iteration (starting with the initial value).
pub fn lr_train_traced(features: &[Vec<f64>], labels: &[Label]) -> Result<(LrModel, Vec<f64>)> {
    if features.len() != labels.len() {
        return Err(shape_err!("{} feature rows for {} labels", features.len(), labels.len()));
    }
    let bona: Vec<&[f64]> = features
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == Label::BonaFide)
        .map(|(f, _)| f.as_slice())
        .collect();
    if bona.is_empty() || bona.len() == features.len() {
        return Err(PadError::Validation("logistic regression needs both classes".into()));
    }
    let d = features[0].len();
    if let Some(bad) = features.iter().find(|f| f.len() != d) {
        return Err(shape_err!("feature rows differ in length: {d} vs {}", bad.len()));
    }
    let znorm = ZNorm::fit(&bona)?;
    let z: Vec<Vec<f64>> = features.iter().map(|f| znorm.apply(f)).collect();
    let y: Vec<f64> = labels.iter().map(|l| l.target()).collect();
    let n = z.len() as f64;

    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut loss = objective(&w, b, &z, &y);
    let mut trace = vec![loss];
    let mut step = LR_INITIAL_STEP;
    for _ in 0..LR_MAX_ITER {
        let mut gw: Vec<f64> = w.iter().map(|v| LR_L2 * v).collect();
        let mut gb = 0.0;
        for (row, &t) in z.iter().zip(&y) {
            let r = (sigmoid(w.iter().zip(row).map(|(a, v)| a * v).sum::<f64>() + b) - t) / n;
            gw.iter_mut().zip(row).for_each(|(g, v)| *g += r * v);
            gb += r;
        }
        // Halve the step until the objective does not increase.
        let accepted = loop {
            let nw: Vec<f64> = w.iter().zip(&gw).map(|(a, g)| a - step * g).collect();
            let nb = b - step * gb;
            let nl = objective(&nw, nb, &z, &y);
            if nl <= loss {
                break Some((nw, nb, nl));
            }
            step /= 2.0;
            if step < LR_MIN_STEP {
                break None;
            }
        };
        let Some((nw, nb, nl)) = accepted else { break };
        let delta = loss - nl;
        w = nw;
        b = nb;
        loss = nl;
        trace.push(loss);
        if delta < LR_TOL {
            break;
        }
    }
    Ok((LrModel { weights: w, bias: b, znorm }, trace))
}

pub fn lr_train(features: &[Vec<f64>], labels: &[Label]) -> Result<LrModel> {
    lr_train_traced(features, labels).map(|(m, _)| m)
}
