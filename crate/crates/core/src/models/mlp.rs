use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, shape_err, Result};
use crate::tensorcore::{sigmoid, Layer, LayerSpec, ParamTensor, TensorND};

pub const MLP_HIDDEN: usize = 32;

/// Feature lengths produced by the three regioning schemes.
pub const SUPPORTED_INPUT_DIMS: [usize; 3] = [1296, 3600, 2304];

/// One hidden ReLU layer and a single sigmoid output giving P(attack).
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub input_dim: usize,
    pub seed: u64,
    /// `Linear → ReLU → Linear`; the sigmoid is applied in [`MlpModel::forward`].
    pub layers: Vec<Layer>,
}

pub fn build_mlp(input_dim: usize, seed: u64) -> Result<MlpModel> {
    if !SUPPORTED_INPUT_DIMS.contains(&input_dim) {
        return Err(invalid!(
            "MLP input dimension {input_dim} is not one of {SUPPORTED_INPUT_DIMS:?}"
        ));
    }
    Ok(build_mlp_unchecked(input_dim, MLP_HIDDEN, seed))
}

/// Builds an MLP of any width; used for small test problems.
pub fn build_mlp_unchecked(input_dim: usize, hidden: usize, seed: u64) -> MlpModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let specs = [
        LayerSpec::Linear {
            inputs: input_dim,
            outputs: hidden,
        },
        LayerSpec::Relu,
        LayerSpec::Linear {
            inputs: hidden,
            outputs: 1,
        },
    ];
    let layers = specs
        .into_iter()
        .map(|s| {
            let mut l = Layer::init(s, &mut rng);
            l.params.iter_mut().for_each(ParamTensor::snap_to_f32);
            l
        })
        .collect();
    MlpModel {
        input_dim,
        seed,
        layers,
    }
}

impl MlpModel {
    fn check(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.input_dim {
            return Err(shape_err!(
                "MLP expects {} features, got {}",
                self.input_dim,
                features.len()
            ));
        }
        Ok(())
    }

    pub fn logit(&self, features: &[f64]) -> Result<f64> {
        self.check(features)?;
        let mut h = TensorND::from_vec(features.to_vec());
        for l in &self.layers {
            h = l.infer(&h)?;
        }
        Ok(h.data()[0])
    }

    /// Probability that the sample is an attack.
    pub fn forward(&self, features: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.logit(features)?))
    }

    pub fn forward_train(&mut self, features: &[f64]) -> Result<f64> {
        self.check(features)?;
        let mut h = TensorND::from_vec(features.to_vec());
        for l in &mut self.layers {
            h = l.forward(&h)?;
        }
        Ok(h.data()[0])
    }

    /// Back-propagates `d loss / d logit`.
    pub fn backward(&mut self, grad_logit: f64) -> Result<()> {
        let mut g = TensorND::from_vec(vec![grad_logit]);
        let n = self.layers.len();
        for (i, l) in self.layers.iter_mut().enumerate().rev() {
            match l.backward(&g, i > 0)? {
                Some(next) => g = next,
                None => debug_assert!(i == 0 || n == 0),
            }
        }
        Ok(())
    }

    pub fn params(&self) -> impl Iterator<Item = &ParamTensor> {
        self.layers.iter().flat_map(|l| l.params.iter())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut ParamTensor> {
        self.layers.iter_mut().flat_map(|l| l.params.iter_mut())
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().for_each(ParamTensor::zero_grad);
    }

    pub fn snap_to_f32(&mut self) {
        self.params_mut().for_each(ParamTensor::snap_to_f32);
    }
}

/// Concatenates per-patch latents in patch order.
pub fn concat_latents(latents: &[Vec<f64>]) -> Vec<f64> {
    latents.iter().flatten().copied().collect()
}
