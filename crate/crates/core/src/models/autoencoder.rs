use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape_err, Result};
use crate::preproc::{image_to_tensor, Image8};
use crate::tensorcore::{Layer, LayerSpec, ParamTensor, TensorND};

/// Convolutional autoencoder over square 3-plane patches.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderModel {
    pub input_size: usize,
    pub latent_shape: [usize; 3],
    pub seed: u64,
    pub encoder: Vec<Layer>,
    pub decoder: Vec<Layer>,
}

/// Which half of the autoencoder a parametrised layer belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Encoder,
    Decoder,
}

/// A conv/deconv layer, numbered from 1 within its half.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LayerId {
    pub part: Part,
    pub ordinal: usize,
}

impl LayerId {
    pub fn enc(ordinal: usize) -> Self {
        LayerId {
            part: Part::Encoder,
            ordinal,
        }
    }

    pub fn dec(ordinal: usize) -> Self {
        LayerId {
            part: Part::Decoder,
            ordinal,
        }
    }
}

impl std::fmt::Display for LayerId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.part {
            Part::Encoder => write!(f, "enc{}", self.ordinal),
            Part::Decoder => write!(f, "dec{}", self.ordinal),
        }
    }
}

/// Fine-tuning strategy for the second training stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Keep the RGB-trained weights.
    None,
    /// Update every layer.
    Full,
    /// Update the first encoder layer(s) and the last two decoder layers.
    #[default]
    Partial,
}

impl std::str::FromStr for Strategy {
    type Err = crate::PadError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Strategy::None),
            "full" => Ok(Strategy::Full),
            "partial" => Ok(Strategy::Partial),
            other => Err(invalid!("unknown strategy {other:?}")),
        }
    }
}

/// Partition of the parametrised layers into adaptable and frozen sets.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParamGroupSpec {
    pub adaptable: BTreeSet<LayerId>,
    pub frozen: BTreeSet<LayerId>,
}

const CHANNELS: usize = 16;

fn conv_block(layers: &mut Vec<LayerSpec>, cin: usize, k: usize, pool: bool) {
    layers.push(LayerSpec::conv(cin, CHANNELS, k));
    layers.push(LayerSpec::Relu);
    if pool {
        layers.push(LayerSpec::MaxPool { window: 2, stride: 2 });
    }
}

fn deconv_block(layers: &mut Vec<LayerSpec>, upsample: bool, cout: usize, k: usize, last: bool) {
    if upsample {
        layers.push(LayerSpec::Upsample { factor: 2 });
    }
    layers.push(LayerSpec::deconv(CHANNELS, cout, k));
    layers.push(if last { LayerSpec::Sigmoid } else { LayerSpec::Relu });
}

/// Reference layer chains. Spatial sizes:
/// 128: 128→124→62→58→29→26→13→9 (16×9×9 = 1296)
/// 64:  64→60→30→26→13→10→5 (16×5×5 = 400)
/// 32:  32→28→14→10→5→3 (16×3×3 = 144)
pub fn reference_architecture(input_size: usize) -> Result<(Vec<LayerSpec>, Vec<LayerSpec>, [usize; 3])> {
    let mut enc = Vec::new();
    let mut dec = Vec::new();
    let latent = match input_size {
        128 => {
            conv_block(&mut enc, 3, 5, true);
            conv_block(&mut enc, CHANNELS, 5, true);
            conv_block(&mut enc, CHANNELS, 4, true);
            conv_block(&mut enc, CHANNELS, 5, false);
            deconv_block(&mut dec, false, CHANNELS, 5, false);
            deconv_block(&mut dec, true, CHANNELS, 4, false);
            deconv_block(&mut dec, true, CHANNELS, 5, false);
            deconv_block(&mut dec, true, 3, 5, true);
            [CHANNELS, 9, 9]
        }
        64 => {
            conv_block(&mut enc, 3, 5, true);
            conv_block(&mut enc, CHANNELS, 5, true);
            conv_block(&mut enc, CHANNELS, 4, true);
            deconv_block(&mut dec, true, CHANNELS, 4, false);
            deconv_block(&mut dec, true, CHANNELS, 5, false);
            deconv_block(&mut dec, true, 3, 5, true);
            [CHANNELS, 5, 5]
        }
        32 => {
            conv_block(&mut enc, 3, 5, true);
            conv_block(&mut enc, CHANNELS, 5, true);
            conv_block(&mut enc, CHANNELS, 3, false);
            deconv_block(&mut dec, false, CHANNELS, 3, false);
            deconv_block(&mut dec, true, CHANNELS, 5, false);
            deconv_block(&mut dec, true, 3, 5, true);
            [CHANNELS, 3, 3]
        }
        other => return Err(invalid!("unsupported autoencoder input size {other}, expected 128, 64 or 32")),
    };
    Ok((enc, dec, latent))
}

/// Latent length for a given patch size.
pub fn latent_dim_for(input_size: usize) -> Result<usize> {
    Ok(reference_architecture(input_size)?.2.iter().product())
}

pub fn build_autoencoder(input_size: usize, seed: u64) -> Result<AutoencoderModel> {
    let (enc, dec, latent_shape) = reference_architecture(input_size)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut make = |specs: Vec<LayerSpec>| -> Vec<Layer> {
        specs
            .into_iter()
            .map(|s| {
                let mut layer = Layer::init(s, &mut rng);
                layer.params.iter_mut().for_each(ParamTensor::snap_to_f32);
                layer
            })
            .collect()
    };
    let encoder = make(enc);
    let decoder = make(dec);
    Ok(AutoencoderModel {
        input_size,
        latent_shape,
        seed,
        encoder,
        decoder,
    })
}

impl AutoencoderModel {
    pub fn latent_dim(&self) -> usize {
        self.latent_shape.iter().product()
    }

    pub fn input_shape(&self) -> [usize; 3] {
        [3, self.input_size, self.input_size]
    }

    fn check_input(&self, x: &TensorND) -> Result<()> {
        if x.shape() != self.input_shape() {
            return Err(shape_err!(
                "autoencoder expects input {:?}, got {:?}",
                self.input_shape(),
                x.shape()
            ));
        }
        Ok(())
    }

    /// Flattened encoder output for a `[3, s, s]` input in `[0, 1]`.
    pub fn encode(&self, x: &TensorND) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut h = x.clone();
        for layer in &self.encoder {
            h = layer.infer(&h)?;
        }
        Ok(h.into_data())
    }

    /// Encodes an 8-bit patch after scaling it to `[0, 1]`.
    pub fn encode_image(&self, patch: &Image8) -> Result<Vec<f64>> {
        self.encode(&image_to_tensor(patch))
    }

    pub fn decode(&self, latent: &[f64]) -> Result<TensorND> {
        if latent.len() != self.latent_dim() {
            return Err(shape_err!(
                "latent has length {}, autoencoder expects {}",
                latent.len(),
                self.latent_dim()
            ));
        }
        let mut h = TensorND::new(self.latent_shape.to_vec(), latent.to_vec())?;
        for layer in &self.decoder {
            h = layer.infer(&h)?;
        }
        Ok(h)
    }

    pub fn reconstruct(&self, x: &TensorND) -> Result<TensorND> {
        self.decode(&self.encode(x)?)
    }

    fn layers(&self) -> impl Iterator<Item = &Layer> {
        self.encoder.iter().chain(&self.decoder)
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Layer> {
        self.encoder.iter_mut().chain(self.decoder.iter_mut())
    }

    /// Parametrised layers with their identifiers, in network order.
    pub fn param_layers(&self) -> Vec<(LayerId, &Layer)> {
        let number = |layers: &[Layer], part: Part| -> Vec<(LayerId, usize)> {
            layers
                .iter()
                .enumerate()
                .filter(|(_, l)| l.spec.has_params())
                .enumerate()
                .map(|(k, (i, _))| (LayerId { part, ordinal: k + 1 }, i))
                .collect()
        };
        let mut out = Vec::new();
        for (id, i) in number(&self.encoder, Part::Encoder) {
            out.push((id, &self.encoder[i]));
        }
        for (id, i) in number(&self.decoder, Part::Decoder) {
            out.push((id, &self.decoder[i]));
        }
        out
    }

    pub fn layer_ids(&self) -> Vec<LayerId> {
        self.param_layers().into_iter().map(|(id, _)| id).collect()
    }

    pub fn layer(&self, id: LayerId) -> Option<&Layer> {
        self.param_layers().into_iter().find(|(i, _)| *i == id).map(|(_, l)| l)
    }

    pub fn params(&self) -> impl Iterator<Item = &ParamTensor> {
        self.layers().flat_map(|l| l.params.iter())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut ParamTensor> {
        self.layers_mut().flat_map(|l| l.params.iter_mut())
    }

    /// Sets the trainable flag of every parametrised layer from `groups`.
    pub fn apply_groups(&mut self, groups: &ParamGroupSpec) {
        let ids = self.layer_ids();
        let mut it = ids.into_iter();
        for layer in self.layers_mut() {
            if layer.spec.has_params() {
                let id = it.next().expect("id per parametrised layer");
                layer.set_trainable(groups.adaptable.contains(&id));
            }
        }
    }

    pub fn set_all_trainable(&mut self, trainable: bool) {
        self.layers_mut().for_each(|l| l.set_trainable(trainable));
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().for_each(ParamTensor::zero_grad);
    }

    pub fn snap_to_f32(&mut self) {
        self.params_mut().for_each(ParamTensor::snap_to_f32);
    }

    /// Forward pass that caches activations for [`Self::backward`].
    pub fn forward_train(&mut self, x: &TensorND) -> Result<TensorND> {
        self.check_input(x)?;
        let mut h = x.clone();
        for layer in self.layers_mut() {
            h = layer.forward(&h)?;
        }
        Ok(h)
    }

    /// Back-propagates a reconstruction gradient, accumulating parameter
    /// gradients. Input gradients are only formed where an earlier layer
    /// still needs them.
    pub fn backward(&mut self, grad: &TensorND) -> Result<()> {
        let first_trainable = self.layers().position(Layer::is_trainable);
        let Some(first) = first_trainable else {
            self.layers_mut().for_each(Layer::clear_cache);
            return Ok(());
        };
        let n = self.encoder.len() + self.decoder.len();
        let mut g = grad.clone();
        for idx in (0..n).rev() {
            let layer = if idx < self.encoder.len() {
                &mut self.encoder[idx]
            } else {
                let e = self.encoder.len();
                &mut self.decoder[idx - e]
            };
            if idx < first {
                layer.clear_cache();
                continue;
            }
            match layer.backward(&g, idx > first)? {
                Some(next) => g = next,
                None => break,
            }
        }
        Ok(())
    }
}

/// Adaptable/frozen split for a strategy. `encoder_depth` is the number of
/// leading encoder layers adapted in partial mode (1 by default).
pub fn param_groups(model: &AutoencoderModel, strategy: Strategy, encoder_depth: usize) -> ParamGroupSpec {
    let ids = model.layer_ids();
    let n_dec = ids.iter().filter(|i| i.part == Part::Decoder).count();
    let adaptable = |id: &LayerId| match strategy {
        Strategy::None => false,
        Strategy::Full => true,
        Strategy::Partial => match id.part {
            Part::Encoder => id.ordinal <= encoder_depth,
            Part::Decoder => id.ordinal + 2 > n_dec,
        },
    };
    let (a, f): (Vec<LayerId>, Vec<LayerId>) = ids.into_iter().partition(adaptable);
    ParamGroupSpec {
        adaptable: a.into_iter().collect(),
        frozen: f.into_iter().collect(),
    }
}

/// First encoder layer plus the last two decoder layers.
pub fn partial_param_groups(model: &AutoencoderModel) -> ParamGroupSpec {
    param_groups(model, Strategy::Partial, 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latent_dims_match_reference() {
        assert_eq!(latent_dim_for(128).unwrap(), 1296);
        assert_eq!(latent_dim_for(64).unwrap(), 400);
        assert_eq!(latent_dim_for(32).unwrap(), 144);
        assert!(build_autoencoder(48, 0).is_err());
    }

    #[test]
    fn round_trip_shapes() {
        for size in [32, 64, 128] {
            let m = build_autoencoder(size, 1).unwrap();
            let x = TensorND::filled(&[3, size, size], 0.5);
            let z = m.encode(&x).unwrap();
            assert_eq!(z.len(), m.latent_dim());
            let y = m.decode(&z).unwrap();
            assert_eq!(y.shape(), x.shape());
            assert!(y.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn spatial_chain_of_64_model() {
        let m = build_autoencoder(64, 0).unwrap();
        let mut h = TensorND::zeros(&[3, 64, 64]);
        let mut sizes = vec![64];
        for l in &m.encoder {
            h = l.infer(&h).unwrap();
            if !matches!(l.spec, LayerSpec::Relu) {
                sizes.push(h.shape()[1]);
            }
        }
        assert_eq!(sizes, vec![64, 60, 30, 26, 13, 10, 5]);
    }

    #[test]
    fn zero_weights_give_zero_latent() {
        let mut m = build_autoencoder(32, 3).unwrap();
        m.params_mut().for_each(|p| p.value.fill(0.0));
        let z = m.encode(&TensorND::zeros(&[3, 32, 32])).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_errors() {
        let m = build_autoencoder(32, 3).unwrap();
        assert!(m.encode(&TensorND::zeros(&[3, 64, 64])).is_err());
        assert!(m.decode(&[0.0; 10]).is_err());
    }

    #[test]
    fn partial_groups_on_64_model() {
        let m = build_autoencoder(64, 0).unwrap();
        let g = partial_param_groups(&m);
        let adaptable: BTreeSet<_> = [LayerId::enc(1), LayerId::dec(2), LayerId::dec(3)].into();
        let frozen: BTreeSet<_> = [LayerId::enc(2), LayerId::enc(3), LayerId::dec(1)].into();
        assert_eq!(g.adaptable, adaptable);
        assert_eq!(g.frozen, frozen);

        let full = param_groups(&m, Strategy::Full, 1);
        assert_eq!(full.adaptable.len(), 6);
        assert!(full.frozen.is_empty());
        let none = param_groups(&m, Strategy::None, 1);
        assert!(none.adaptable.is_empty());
        assert_eq!(none.frozen.len(), 6);
    }

    #[test]
    fn groups_partition_every_size() {
        for size in [32, 64, 128] {
            let m = build_autoencoder(size, 0).unwrap();
            let g = partial_param_groups(&m);
            assert!(g.adaptable.is_disjoint(&g.frozen));
            let all: BTreeSet<_> = m.layer_ids().into_iter().collect();
            let union: BTreeSet<_> = g.adaptable.union(&g.frozen).copied().collect();
            assert_eq!(union, all);
            let dec = g.adaptable.iter().filter(|i| i.part == Part::Decoder).count();
            assert_eq!(dec, 2);
        }
    }
}
