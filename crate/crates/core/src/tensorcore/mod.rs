//! Minimal numerical core: tensors, differentiable layer primitives, losses
//! and an Adam optimizer with per-parameter freezing.

pub mod conv;
pub mod dense;
pub mod layers;
pub mod loss;
pub mod optim;
pub mod pool;
mod tensor;

pub use conv::{conv2d, conv2d_backward, deconv2d, deconv2d_backward, ConvGrads};
pub use dense::{linear, linear_backward, relu, relu_backward, sigmoid, sigmoid_backward};
pub use layers::{Layer, LayerSpec};
pub use loss::{bce_loss, bce_mean, mse_loss, BCE_EPS};
pub use optim::{AdamConfig, OptimizerState, ParamTensor};
pub use pool::{maxpool2d, maxpool2d_backward, upsample_nearest, upsample_nearest_backward};
pub use tensor::TensorND;
