//! Three-step training: autoencoder pre-training on RGB bona-fide faces,
//! fine-tuning on multi-channel bona-fide faces, and MLP training over the
//! concatenated latent encodings with restarts selected on the dev set.

mod features;

pub use features::{FeatureRow, FeatureTable};

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::{AttackCategory, Label, Subset};
use crate::error::{invalid, shape_err, PadError, Result};
use crate::models::{
    build_autoencoder, build_mlp, concat_latents, param_groups, AutoencoderModel, MlpModel, Strategy,
};
use crate::preproc::{extract_patches, McFaceImage, Regions};
use crate::tensorcore::{bce_mean, mse_loss, sigmoid, AdamConfig, OptimizerState, TensorND, BCE_EPS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs_pretrain: usize,
    pub epochs_finetune: usize,
    pub strategy: Strategy,
    pub regions: Regions,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub master_seed: u64,
    pub mlp_restarts: usize,
    pub epochs_mlp: usize,
    pub mlp_learning_rate: f64,
    /// Leading encoder layers adapted by partial fine-tuning.
    pub adaptable_encoder_depth: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs_pretrain: 50,
            epochs_finetune: 50,
            strategy: Strategy::Partial,
            regions: Regions::NINE,
            batch_size: 32,
            learning_rate: 1e-3,
            master_seed: 0,
            mlp_restarts: 10,
            epochs_mlp: 100,
            mlp_learning_rate: 1e-3,
            adaptable_encoder_depth: 1,
        }
    }
}

impl TrainConfig {
    fn adam(&self, lr: f64) -> AdamConfig {
        AdamConfig {
            learning_rate: lr,
            ..AdamConfig::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(invalid!("batch_size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.mlp_learning_rate > 0.0) {
            return Err(invalid!("learning rates must be positive"));
        }
        Ok(())
    }
}

/// A preprocessed face with its ground truth.
#[derive(Debug, Clone)]
pub struct LabeledFace {
    pub face: McFaceImage,
    pub label: Label,
    pub subset: Subset,
    pub category: AttackCategory,
}

/// Derives independent stream seeds from the master seed.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let mut z = master ^ stream.rotate_left(32) ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_AE_INIT: u64 = 1;
const STREAM_AE_PRETRAIN: u64 = 2;
const STREAM_AE_FINETUNE: u64 = 3;

/// Per-region patch tensors: `out[k]` holds patch `k` of every face.
fn region_patches(faces: &[LabeledFace], regions: Regions) -> Result<Vec<Vec<TensorND>>> {
    let mut out = vec![Vec::with_capacity(faces.len()); regions.count()];
    for f in faces {
        let grid = extract_patches(&f.face.image, regions)?;
        for (k, p) in grid.patches.iter().enumerate() {
            out[k].push(p.to_tensor());
        }
    }
    Ok(out)
}

fn require_bona_fide(faces: &[LabeledFace], stage: &str) -> Result<()> {
    if let Some(bad) = faces.iter().find(|f| f.label != Label::BonaFide) {
        return Err(PadError::Validation(format!(
            "{stage} must use bona-fide samples only, got attack {} frame {}",
            bad.face.sample_id, bad.face.frame
        )));
    }
    if faces.is_empty() {
        return Err(PadError::Validation(format!("{stage}: no training faces")));
    }
    Ok(())
}

/// Trains one autoencoder on reconstruction MSE. Returns the mean training
/// loss of every epoch.
pub fn train_reconstruction(
    model: &mut AutoencoderModel,
    patches: &[TensorND],
    epochs: usize,
    batch_size: usize,
    adam: AdamConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut opt = OptimizerState::new(adam, model.params());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..patches.len()).collect();
    let mut history = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(batch_size) {
            model.zero_grad();
            for &i in batch {
                let x = &patches[i];
                let recon = model.forward_train(x)?;
                let (loss, mut grad) = mse_loss(&recon, x)?;
                grad.scale(1.0 / batch.len() as f64);
                model.backward(&grad)?;
                total += loss;
            }
            let mut params: Vec<_> = model.params_mut().collect();
            opt.step(&mut params)?;
        }
        history.push(total / patches.len().max(1) as f64);
    }
    model.snap_to_f32();
    Ok(history)
}

/// Result of an autoencoder training stage.
#[derive(Debug, Clone)]
pub struct AeStage {
    pub models: Vec<AutoencoderModel>,
    /// Per-region mean reconstruction loss per epoch.
    pub loss_history: Vec<Vec<f64>>,
}

/// Step 1: one autoencoder per facial region, trained on bona-fide RGB faces.
pub fn train_autoencoders(rgb_faces: &[LabeledFace], config: &TrainConfig) -> Result<AeStage> {
    config.validate()?;
    require_bona_fide(rgb_faces, "autoencoder pre-training")?;
    let per_region = region_patches(rgb_faces, config.regions)?;
    let size = config.regions.patch_size();
    let mut models = Vec::with_capacity(per_region.len());
    let mut loss_history = Vec::with_capacity(per_region.len());
    for (k, patches) in per_region.iter().enumerate() {
        let mut model = build_autoencoder(size, derive_seed(config.master_seed, STREAM_AE_INIT, k as u64))?;
        let history = train_reconstruction(
            &mut model,
            patches,
            config.epochs_pretrain,
            config.batch_size,
            config.adam(config.learning_rate),
            derive_seed(config.master_seed, STREAM_AE_PRETRAIN, k as u64),
        )?;
        info!(
            "pre-trained region {k}: loss {:.5} -> {:.5}",
            history.first().copied().unwrap_or(f64::NAN),
            history.last().copied().unwrap_or(f64::NAN)
        );
        models.push(model);
        loss_history.push(history);
    }
    Ok(AeStage { models, loss_history })
}

/// Step 2: adapts the pre-trained autoencoders to multi-channel faces with
/// the configured strategy. Optimizer moments start fresh.
pub fn finetune_autoencoders(
    models: &[AutoencoderModel],
    mc_faces: &[LabeledFace],
    config: &TrainConfig,
) -> Result<AeStage> {
    config.validate()?;
    require_bona_fide(mc_faces, "autoencoder fine-tuning")?;
    if models.len() != config.regions.count() {
        return Err(shape_err!(
            "{} autoencoders for {} regions",
            models.len(),
            config.regions.count()
        ));
    }
    let per_region = region_patches(mc_faces, config.regions)?;
    let mut out = Vec::with_capacity(models.len());
    let mut loss_history = Vec::with_capacity(models.len());
    for (k, (model, patches)) in models.iter().zip(&per_region).enumerate() {
        if let Some(p) = patches.first() {
            if p.shape() != model.input_shape() {
                return Err(shape_err!(
                    "region {k}: patches {:?} do not fit autoencoder input {:?}",
                    p.shape(),
                    model.input_shape()
                ));
            }
        }
        let mut model = model.clone();
        if config.strategy == Strategy::None {
            out.push(model);
            loss_history.push(Vec::new());
            continue;
        }
        let groups = param_groups(&model, config.strategy, config.adaptable_encoder_depth);
        model.apply_groups(&groups);
        let history = train_reconstruction(
            &mut model,
            patches,
            config.epochs_finetune,
            config.batch_size,
            config.adam(config.learning_rate),
            derive_seed(config.master_seed, STREAM_AE_FINETUNE, k as u64),
        )?;
        model.set_all_trainable(true);
        debug!("fine-tuned region {k} ({:?}): {history:?}", config.strategy);
        out.push(model);
        loss_history.push(history);
    }
    Ok(AeStage {
        models: out,
        loss_history,
    })
}

/// Concatenated latent vector of one face.
pub fn face_features(models: &[AutoencoderModel], face: &McFaceImage, regions: Regions) -> Result<Vec<f64>> {
    if models.len() != regions.count() {
        return Err(shape_err!("{} autoencoders for {} regions", models.len(), regions.count()));
    }
    let grid = extract_patches(&face.image, regions)?;
    let latents = models
        .iter()
        .zip(&grid.patches)
        .map(|(m, p)| m.encode_image(&p.image))
        .collect::<Result<Vec<_>>>()?;
    Ok(concat_latents(&latents))
}

/// Step 3 input: one feature row per face.
pub fn extract_features(models: &[AutoencoderModel], faces: &[LabeledFace], regions: Regions) -> Result<FeatureTable> {
    let rows = faces
        .iter()
        .map(|f| {
            let features = face_features(models, &f.face, regions)
                .map_err(|e| e.for_sample(&f.face.sample_id, f.face.frame))?;
            Ok(FeatureRow {
                sample_id: f.face.sample_id.clone(),
                frame: f.face.frame,
                label: f.label,
                subset: f.subset,
                category: f.category,
                features,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    FeatureTable::new(rows)
}

#[derive(Debug, Clone)]
pub struct MlpTraining {
    pub best: MlpModel,
    pub best_restart: usize,
    /// Dev-set BCE of every restart, in restart order.
    pub dev_losses: Vec<f64>,
}

fn labels_of(table: &FeatureTable) -> Vec<f64> {
    table.rows.iter().map(|r| r.label.target()).collect()
}

/// Trains one MLP with mini-batch Adam on mean BCE.
pub fn fit_mlp(
    model: &mut MlpModel,
    table: &FeatureTable,
    epochs: usize,
    batch_size: usize,
    adam: AdamConfig,
    seed: u64,
) -> Result<()> {
    let targets = labels_of(table);
    let mut opt = OptimizerState::new(adam, model.params());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..table.rows.len()).collect();
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(batch_size) {
            model.zero_grad();
            for &i in batch {
                let logit = model.forward_train(&table.rows[i].features)?;
                let p = sigmoid(logit).clamp(BCE_EPS, 1.0 - BCE_EPS);
                // d BCE / d logit, averaged over the batch
                model.backward((p - targets[i]) / batch.len() as f64)?;
            }
            let mut params: Vec<_> = model.params_mut().collect();
            opt.step(&mut params)?;
        }
    }
    model.snap_to_f32();
    Ok(())
}

pub fn mlp_bce(model: &MlpModel, table: &FeatureTable) -> Result<f64> {
    let probs = table
        .rows
        .iter()
        .map(|r| model.forward(&r.features))
        .collect::<Result<Vec<_>>>()?;
    bce_mean(&probs, &labels_of(table))
}

/// Trains `mlp_restarts` MLPs seeded `master_seed + r` and keeps the one with
/// the lowest dev BCE (lowest restart index on ties).
pub fn train_mlp(train: &FeatureTable, dev: &FeatureTable, config: &TrainConfig) -> Result<MlpTraining> {
    train_mlp_with(train, dev, config, build_mlp)
}

/// As [`train_mlp`] with a custom constructor, e.g. for non-standard feature sizes.
pub fn train_mlp_with(
    train: &FeatureTable,
    dev: &FeatureTable,
    config: &TrainConfig,
    build: impl Fn(usize, u64) -> Result<MlpModel>,
) -> Result<MlpTraining> {
    config.validate()?;
    if config.mlp_restarts == 0 {
        return Err(invalid!("mlp_restarts must be at least 1"));
    }
    if !train.has_both_classes() {
        return Err(PadError::Validation(
            "MLP training set must contain both bona-fide and attack samples".into(),
        ));
    }
    if dev.rows.is_empty() {
        return Err(PadError::Validation("dev set is empty".into()));
    }
    let dim = train.dim();
    if dev.dim() != dim {
        return Err(shape_err!("train features have length {dim}, dev {}", dev.dim()));
    }
    let mut best: Option<(usize, MlpModel)> = None;
    let mut dev_losses = Vec::with_capacity(config.mlp_restarts);
    for r in 0..config.mlp_restarts {
        let seed = config.master_seed.wrapping_add(r as u64);
        let mut model = build(dim, seed)?;
        fit_mlp(
            &mut model,
            train,
            config.epochs_mlp,
            config.batch_size,
            config.adam(config.mlp_learning_rate),
            seed,
        )?;
        let loss = mlp_bce(&model, dev)?;
        info!("MLP restart {r}: dev BCE {loss:.5}");
        let improves = match &best {
            None => true,
            Some((b, _)) => loss < dev_losses[*b],
        };
        dev_losses.push(loss);
        if improves {
            best = Some((r, model));
        }
    }
    let (best_restart, best) = best.expect("at least one restart");
    Ok(MlpTraining {
        best,
        best_restart,
        dev_losses,
    })
}

/// Composed detector: patches → encoders → concatenation → MLP.
#[derive(Debug, Clone)]
pub struct PadSystem {
    pub regions: Regions,
    pub autoencoders: Vec<AutoencoderModel>,
    pub mlp: MlpModel,
}

impl PadSystem {
    pub fn new(regions: Regions, autoencoders: Vec<AutoencoderModel>, mlp: MlpModel) -> Result<Self> {
        if autoencoders.len() != regions.count() {
            return Err(shape_err!(
                "{} autoencoders for {} regions",
                autoencoders.len(),
                regions.count()
            ));
        }
        let dim: usize = autoencoders.iter().map(AutoencoderModel::latent_dim).sum();
        if dim != mlp.input_dim {
            return Err(shape_err!("latents total {dim} but MLP expects {}", mlp.input_dim));
        }
        if autoencoders.iter().any(|m| m.input_size != regions.patch_size()) {
            return Err(shape_err!("autoencoder input size does not match the region patch size"));
        }
        Ok(PadSystem {
            regions,
            autoencoders,
            mlp,
        })
    }

    /// P(attack) for a preprocessed face.
    pub fn predict(&self, face: &McFaceImage) -> Result<f64> {
        let features = face_features(&self.autoencoders, face, self.regions)
            .map_err(|e| e.for_sample(&face.sample_id, face.frame))?;
        self.mlp.forward(&features)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::build_mlp_unchecked;
    use crate::preproc::Image8;

    fn face(id: &str, value: u8, label: Label) -> LabeledFace {
        let img = Image8::new(
            128,
            128,
            3,
            (0..3 * 128 * 128).map(|i| ((i / 7) % 50) as u8 + value).collect(),
        )
        .unwrap();
        LabeledFace {
            face: McFaceImage::new(img, id, 0).unwrap(),
            label,
            subset: Subset::Train,
            category: if label == Label::BonaFide {
                AttackCategory::None
            } else {
                AttackCategory::Print
            },
        }
    }

    #[test]
    fn seeds_are_distinct() {
        let a = derive_seed(7, 1, 0);
        assert_ne!(a, derive_seed(7, 1, 1));
        assert_ne!(a, derive_seed(7, 2, 0));
        assert_ne!(a, derive_seed(8, 1, 0));
        assert_eq!(a, derive_seed(7, 1, 0));
    }

    #[test]
    fn attack_faces_rejected_for_autoencoders() {
        let cfg = TrainConfig {
            regions: Regions::SIXTEEN,
            epochs_pretrain: 1,
            ..TrainConfig::default()
        };
        let faces = vec![face("a", 10, Label::BonaFide), face("b", 20, Label::Attack)];
        let err = train_autoencoders(&faces, &cfg).unwrap_err();
        assert!(matches!(err, PadError::Validation(_)), "{err}");
        assert!(finetune_autoencoders(&[], &faces, &cfg).is_err());
    }

    #[test]
    fn one_model_per_region() {
        let faces = vec![face("a", 10, Label::BonaFide), face("b", 60, Label::BonaFide)];
        let cfg = TrainConfig {
            regions: Regions::SIXTEEN,
            epochs_pretrain: 1,
            ..TrainConfig::default()
        };
        let stage = train_autoencoders(&faces, &cfg).unwrap();
        assert_eq!(stage.models.len(), 16);
        assert!(stage.models.iter().all(|m| m.input_size == 32));
    }

    #[test]
    fn single_class_mlp_training_rejected() {
        let rows = (0..4)
            .map(|i| FeatureRow {
                sample_id: format!("s{i}"),
                frame: 0,
                label: Label::BonaFide,
                subset: Subset::Train,
                category: AttackCategory::None,
                features: vec![i as f64; 3],
            })
            .collect();
        let table = FeatureTable::new(rows).unwrap();
        let cfg = TrainConfig::default();
        let err = train_mlp_with(&table, &table, &cfg, |d, s| Ok(build_mlp_unchecked(d, 4, s))).unwrap_err();
        assert!(matches!(err, PadError::Validation(_)));
    }
}
