use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::TensorND;
use crate::error::{shape_err, Result};

/// A learnable tensor with its accumulated gradient and a freeze flag.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensor {
    pub value: TensorND,
    pub grad: TensorND,
    pub trainable: bool,
}

impl ParamTensor {
    pub fn new(value: TensorND) -> Self {
        let grad = TensorND::zeros_like(&value);
        ParamTensor {
            value,
            grad,
            trainable: true,
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::new(TensorND::zeros(shape))
    }

    /// Uniform initialisation in `±sqrt(1 / fan_in)`.
    pub fn uniform_fan_in(shape: &[usize], fan_in: usize, rng: &mut impl Rng) -> Self {
        let bound = (1.0 / fan_in as f64).sqrt();
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
        Self::new(TensorND::new(shape.to_vec(), data).expect("shape product matches"))
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    /// Rounds the stored value to the nearest `f32`, the precision of model files.
    pub fn snap_to_f32(&mut self) {
        for v in self.value.data_mut() {
            *v = *v as f32 as f64;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam optimizer state: first/second moments for every parameter it was
/// created for, and the number of update calls so far.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub config: AdamConfig,
    step: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new<'a>(config: AdamConfig, params: impl IntoIterator<Item = &'a ParamTensor>) -> Self {
        let lens: Vec<usize> = params.into_iter().map(|p| p.value.len()).collect();
        OptimizerState {
            config,
            step: 0,
            first_moment: lens.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: lens.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one bias-corrected Adam update to every trainable parameter.
    /// Frozen parameters and their moments are left untouched.
    pub fn step(&mut self, params: &mut [&mut ParamTensor]) -> Result<()> {
        if params.len() != self.first_moment.len() {
            return Err(shape_err!(
                "optimizer tracks {} parameters, got {}",
                self.first_moment.len(),
                params.len()
            ));
        }
        for (i, p) in params.iter().enumerate() {
            if p.value.len() != self.first_moment[i].len() || p.grad.shape() != p.value.shape() {
                return Err(shape_err!(
                    "parameter {i}: value {:?} / grad {:?} does not match optimizer state of {} elements",
                    p.value.shape(),
                    p.grad.shape(),
                    self.first_moment[i].len()
                ));
            }
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let correction1 = 1.0 - beta1.powi(t);
        let correction2 = 1.0 - beta2.powi(t);
        for (i, p) in params.iter_mut().enumerate() {
            if !p.trainable {
                continue;
            }
            let m = &mut self.first_moment[i];
            let v = &mut self.second_moment[i];
            let grad = p.grad.data();
            let value = p.value.data_mut();
            for j in 0..value.len() {
                let g = grad[j];
                m[j] = beta1 * m[j] + (1.0 - beta1) * g;
                v[j] = beta2 * v[j] + (1.0 - beta2) * g * g;
                let m_hat = m[j] / correction1;
                let v_hat = v[j] / correction2;
                value[j] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}
