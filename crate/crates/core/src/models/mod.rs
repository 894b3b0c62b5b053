//! Autoencoder and MLP architectures, latent extraction, fine-tuning groups
//! and the on-disk model container.

mod autoencoder;
mod container;
mod mlp;

pub use autoencoder::{
    build_autoencoder, latent_dim_for, param_groups, partial_param_groups, reference_architecture,
    AutoencoderModel, LayerId, ParamGroupSpec, Part, Strategy,
};
pub use container::{write_atomic, ModelKind, FORMAT_VERSION, MAGIC};
pub use mlp::{build_mlp, build_mlp_unchecked, concat_latents, MlpModel, MLP_HIDDEN, SUPPORTED_INPUT_DIMS};
