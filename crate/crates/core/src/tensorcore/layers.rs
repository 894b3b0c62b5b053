//! Stateful layer wrappers around the functional primitives.
//!
//! `forward` caches whatever the matching `backward` needs; `infer` runs the
//! same computation through a shared reference without touching the cache.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::conv::{self, Needs};
use super::dense;
use super::optim::ParamTensor;
use super::pool;
use super::tensor::TensorND;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    Deconv {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    MaxPool {
        window: usize,
        stride: usize,
    },
    Upsample {
        factor: usize,
    },
    Relu,
    Sigmoid,
    Linear {
        inputs: usize,
        outputs: usize,
    },
}

impl LayerSpec {
    pub fn conv(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        LayerSpec::Conv {
            in_channels,
            out_channels,
            kernel,
            stride: 1,
            padding: 0,
        }
    }

    pub fn deconv(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        LayerSpec::Deconv {
            in_channels,
            out_channels,
            kernel,
            stride: 1,
            padding: 0,
        }
    }

    /// Shapes of the weight and bias tensors, if the layer has any.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        match *self {
            LayerSpec::Conv {
                in_channels,
                out_channels,
                kernel,
                ..
            } => vec![vec![out_channels, in_channels, kernel, kernel], vec![out_channels]],
            LayerSpec::Deconv {
                in_channels,
                out_channels,
                kernel,
                ..
            } => vec![vec![in_channels, out_channels, kernel, kernel], vec![out_channels]],
            LayerSpec::Linear { inputs, outputs } => vec![vec![outputs, inputs], vec![outputs]],
            _ => vec![],
        }
    }

    fn fan_in(&self) -> usize {
        match *self {
            LayerSpec::Conv {
                in_channels, kernel, ..
            }
            | LayerSpec::Deconv {
                in_channels, kernel, ..
            } => in_channels * kernel * kernel,
            LayerSpec::Linear { inputs, .. } => inputs,
            _ => 1,
        }
    }

    pub fn has_params(&self) -> bool {
        matches!(
            self,
            LayerSpec::Conv { .. } | LayerSpec::Deconv { .. } | LayerSpec::Linear { .. }
        )
    }
}

#[derive(Debug, Clone)]
enum Cache {
    Input(TensorND),
    Output(TensorND),
    Argmax { indices: Vec<usize>, shape: Vec<usize> },
}

#[derive(Debug, Clone)]
pub struct Layer {
    pub spec: LayerSpec,
    /// Weight followed by bias for parametrised layers, empty otherwise.
    pub params: Vec<ParamTensor>,
    cache: Option<Cache>,
}

impl PartialEq for Layer {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec && self.params == other.params
    }
}

impl Layer {
    /// Weights uniform in `±sqrt(1/fan_in)`, biases zero.
    pub fn init(spec: LayerSpec, rng: &mut impl Rng) -> Self {
        let shapes = spec.param_shapes();
        let params = shapes
            .iter()
            .enumerate()
            .map(|(i, shape)| {
                if i == 0 {
                    ParamTensor::uniform_fan_in(shape, spec.fan_in(), rng)
                } else {
                    ParamTensor::zeros(shape)
                }
            })
            .collect();
        Layer {
            spec,
            params,
            cache: None,
        }
    }

    pub fn from_params(spec: LayerSpec, params: Vec<ParamTensor>) -> Result<Self> {
        let shapes = spec.param_shapes();
        if shapes.len() != params.len()
            || shapes.iter().zip(&params).any(|(s, p)| p.value.shape() != s.as_slice())
        {
            return Err(invalid!("parameters do not match layer {spec:?}"));
        }
        Ok(Layer {
            spec,
            params,
            cache: None,
        })
    }

    pub fn set_trainable(&mut self, trainable: bool) {
        for p in &mut self.params {
            p.trainable = trainable;
        }
    }

    pub fn is_trainable(&self) -> bool {
        self.params.iter().any(|p| p.trainable)
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }

    pub fn infer(&self, x: &TensorND) -> Result<TensorND> {
        match self.spec {
            LayerSpec::Conv {
                stride, padding, ..
            } => conv::conv2d(x, &self.params[0].value, self.params[1].value.data(), stride, padding),
            LayerSpec::Deconv {
                stride, padding, ..
            } => conv::deconv2d(x, &self.params[0].value, self.params[1].value.data(), stride, padding),
            LayerSpec::MaxPool { window, stride } => Ok(pool::maxpool2d(x, window, stride)?.0),
            LayerSpec::Upsample { factor } => pool::upsample_nearest(x, factor),
            LayerSpec::Relu => Ok(x.map(dense::relu)),
            LayerSpec::Sigmoid => Ok(x.map(dense::sigmoid)),
            LayerSpec::Linear { .. } => {
                let out = dense::linear(x.data(), &self.params[0].value, self.params[1].value.data())?;
                Ok(TensorND::from_vec(out))
            }
        }
    }

    pub fn forward(&mut self, x: &TensorND) -> Result<TensorND> {
        let (out, cache) = match self.spec {
            LayerSpec::MaxPool { window, stride } => {
                let (y, indices) = pool::maxpool2d(x, window, stride)?;
                (
                    y,
                    Cache::Argmax {
                        indices,
                        shape: x.shape().to_vec(),
                    },
                )
            }
            LayerSpec::Sigmoid => {
                let y = self.infer(x)?;
                (y.clone(), Cache::Output(y))
            }
            LayerSpec::Upsample { .. } => (self.infer(x)?, Cache::Input(TensorND::zeros(&[1]))),
            _ => (self.infer(x)?, Cache::Input(x.clone())),
        };
        self.cache = Some(cache);
        Ok(out)
    }

    /// Back-propagates `grad` through the last `forward`, accumulating into
    /// the gradients of trainable parameters. Returns the input gradient when
    /// `need_input` is set.
    pub fn backward(&mut self, grad: &TensorND, need_input: bool) -> Result<Option<TensorND>> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| invalid!("backward called without a cached forward pass"))?;
        let need_params = self.is_trainable();
        match (self.spec, cache) {
            (
                LayerSpec::Conv {
                    stride, padding, ..
                },
                Cache::Input(x),
            ) => {
                let needs = Needs {
                    input: need_input,
                    params: need_params,
                };
                let parts =
                    conv::conv2d_backward_parts(grad, &x, &self.params[0].value, stride, padding, needs)?;
                self.accumulate(parts.kernel, parts.bias)?;
                Ok(parts.input)
            }
            (
                LayerSpec::Deconv {
                    stride, padding, ..
                },
                Cache::Input(x),
            ) => {
                let needs = Needs {
                    input: need_input,
                    params: need_params,
                };
                let parts =
                    conv::deconv2d_backward_parts(grad, &x, &self.params[0].value, stride, padding, needs)?;
                self.accumulate(parts.kernel, parts.bias)?;
                Ok(parts.input)
            }
            (LayerSpec::MaxPool { .. }, Cache::Argmax { indices, shape }) => {
                Ok(Some(pool::maxpool2d_backward(grad, &indices, &shape)?))
            }
            (LayerSpec::Upsample { factor }, _) => Ok(Some(pool::upsample_nearest_backward(grad, factor)?)),
            (LayerSpec::Relu, Cache::Input(x)) => {
                check_same(grad, &x)?;
                let mut g = grad.clone();
                for (gi, &xi) in g.data_mut().iter_mut().zip(x.data()) {
                    *gi = dense::relu_backward(xi, *gi);
                }
                Ok(Some(g))
            }
            (LayerSpec::Sigmoid, Cache::Output(y)) => {
                check_same(grad, &y)?;
                let mut g = grad.clone();
                for (gi, &yi) in g.data_mut().iter_mut().zip(y.data()) {
                    *gi = dense::sigmoid_backward(yi, *gi);
                }
                Ok(Some(g))
            }
            (LayerSpec::Linear { .. }, Cache::Input(x)) => {
                let grads = dense::linear_backward(grad.data(), x.data(), &self.params[0].value)?;
                if need_params {
                    self.accumulate(Some(grads.weights), Some(grads.bias))?;
                }
                Ok(Some(TensorND::from_vec(grads.input)))
            }
            (spec, _) => Err(invalid!("inconsistent forward cache for layer {spec:?}")),
        }
    }

    fn accumulate(&mut self, weight: Option<TensorND>, bias: Option<Vec<f64>>) -> Result<()> {
        if let Some(w) = weight {
            if self.params[0].trainable {
                self.params[0].grad.add_assign(&w)?;
            }
        }
        if let Some(b) = bias {
            if self.params[1].trainable {
                self.params[1].grad.add_assign(&TensorND::from_vec(b))?;
            }
        }
        Ok(())
    }
}

fn check_same(grad: &TensorND, cached: &TensorND) -> Result<()> {
    if grad.shape() != cached.shape() {
        return Err(crate::error::shape_err!(
            "gradient {:?} does not match forward output {:?}",
            grad.shape(),
            cached.shape()
        ));
    }
    Ok(())
}
