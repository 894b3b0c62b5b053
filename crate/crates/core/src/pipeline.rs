//! End-to-end experiment steps shared by the command-line tool and tests.

use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};

use crate::dataio::{load_faces, load_manifest, validate_manifest, Label, SampleRecord, Subset, FORMAT_VERSION};
use crate::error::{invalid, PadError, Result};
use crate::eval::{evaluate, EvalReport, ScoreEntry, FRAMES_PER_VIDEO};
use crate::models::{AutoencoderModel, MlpModel};
use crate::preproc::{ChannelMode, PreprocConfig, Regions};
use crate::trainer::{
    extract_features, finetune_autoencoders, train_autoencoders, train_mlp, AeStage, FeatureTable, LabeledFace,
    MlpTraining, TrainConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub format_version: u32,
    /// Multi-channel manifest (train/dev/eval videos).
    pub mc_manifest: PathBuf,
    /// RGB-only manifest of bona-fide faces for pre-training.
    pub rgb_manifest: PathBuf,
    pub mode: ChannelMode,
    pub preproc: PreprocConfig,
    pub train: TrainConfig,
    /// Frames sampled per video for feature extraction and scoring.
    pub frames_per_video: usize,
    /// Frames sampled per bona-fide training video for fine-tuning.
    pub finetune_frames_per_video: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            format_version: FORMAT_VERSION,
            mc_manifest: PathBuf::from("mc/manifest.jsonl"),
            rgb_manifest: PathBuf::from("rgb/manifest.jsonl"),
            mode: ChannelMode::Mc,
            preproc: PreprocConfig::default(),
            train: TrainConfig::default(),
            frames_per_video: FRAMES_PER_VIDEO,
            finetune_frames_per_video: FRAMES_PER_VIDEO,
        }
    }
}

impl ExperimentConfig {
    /// Reads a JSON config; relative manifest paths resolve against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| PadError::io(path, e))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| PadError::Validation(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.mc_manifest = base.join(&cfg.mc_manifest);
        cfg.rgb_manifest = base.join(&cfg.rgb_manifest);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(PadError::Validation(format!(
                "unsupported format_version {}",
                self.format_version
            )));
        }
        if self.frames_per_video == 0 || self.finetune_frames_per_video == 0 {
            return Err(invalid!("frames per video must be positive"));
        }
        Ok(())
    }
}

fn manifest_root(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new(""))
}

/// Loads a manifest and rejects it when any record invariant fails.
pub fn load_valid_manifest(path: &Path) -> Result<Vec<SampleRecord>> {
    let records = load_manifest(path)?;
    let diags = validate_manifest(&records);
    if !diags.is_empty() {
        let list: Vec<String> = diags.iter().map(ToString::to_string).collect();
        return Err(PadError::Validation(format!("{}: {}", path.display(), list.join("; "))));
    }
    Ok(records)
}

/// Preprocessed RGB pre-training faces.
pub fn load_pretrain_faces(cfg: &ExperimentConfig) -> Result<Vec<LabeledFace>> {
    let records = load_valid_manifest(&cfg.rgb_manifest)?;
    let bona: Vec<SampleRecord> = records.into_iter().filter(|r| r.label == Label::BonaFide).collect();
    load_faces(
        &bona,
        manifest_root(&cfg.rgb_manifest),
        ChannelMode::Rgb,
        &cfg.preproc,
        cfg.frames_per_video,
    )
}

/// Preprocessed faces of the multi-channel manifest in the configured mode.
pub fn load_experiment_faces(cfg: &ExperimentConfig, frames_per_video: usize, filter: impl Fn(&SampleRecord) -> bool) -> Result<Vec<LabeledFace>> {
    let records: Vec<SampleRecord> = load_valid_manifest(&cfg.mc_manifest)?
        .into_iter()
        .filter(|r| filter(r))
        .collect();
    load_faces(&records, manifest_root(&cfg.mc_manifest), cfg.mode, &cfg.preproc, frames_per_video)
}

pub fn pretrain(cfg: &ExperimentConfig) -> Result<AeStage> {
    let faces = load_pretrain_faces(cfg)?;
    info!("pre-training on {} RGB faces", faces.len());
    train_autoencoders(&faces, &cfg.train)
}

pub fn finetune(cfg: &ExperimentConfig, pretrained: &[AutoencoderModel]) -> Result<AeStage> {
    let faces = load_experiment_faces(cfg, cfg.finetune_frames_per_video, |r| {
        r.subset == Subset::Train && r.label == Label::BonaFide
    })?;
    info!("fine-tuning on {} {:?} faces", faces.len(), cfg.mode);
    finetune_autoencoders(pretrained, &faces, &cfg.train)
}

pub fn extract(cfg: &ExperimentConfig, models: &[AutoencoderModel]) -> Result<FeatureTable> {
    let faces = load_experiment_faces(cfg, cfg.frames_per_video, |_| true)?;
    info!("extracting features of {} faces", faces.len());
    extract_features(models, &faces, cfg.train.regions)
}

pub fn fit_mlp(cfg: &ExperimentConfig, table: &FeatureTable) -> Result<MlpTraining> {
    train_mlp(&table.subset(Subset::Train), &table.subset(Subset::Dev), &cfg.train)
}

/// MLP scores of every row of one subset.
pub fn score_table(mlp: &MlpModel, table: &FeatureTable, subset: Subset) -> Result<Vec<ScoreEntry>> {
    table
        .rows
        .iter()
        .filter(|r| r.subset == subset)
        .map(|r| ScoreEntry::new(r.sample_id.clone(), r.frame, mlp.forward(&r.features)?, r.label, Some(r.category)))
        .collect()
}

fn region_file(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("region_{k:02}.mcae"))
}

pub fn save_autoencoders(dir: &Path, models: &[AutoencoderModel]) -> Result<()> {
    for (k, m) in models.iter().enumerate() {
        m.save(&region_file(dir, k))?;
    }
    Ok(())
}

pub fn load_autoencoders(dir: &Path, regions: Regions) -> Result<Vec<AutoencoderModel>> {
    let models = (0..regions.count())
        .map(|k| AutoencoderModel::load(&region_file(dir, k)))
        .collect::<Result<Vec<_>>>()?;
    if models.iter().any(|m| m.input_size != regions.patch_size()) {
        return Err(PadError::Validation(format!(
            "autoencoders in {} do not match {} regions",
            dir.display(),
            regions.count()
        )));
    }
    Ok(models)
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub pretrained: AeStage,
    pub finetuned: AeStage,
    pub features: FeatureTable,
    pub mlp: MlpTraining,
    pub dev_scores: Vec<ScoreEntry>,
    pub eval_scores: Vec<ScoreEntry>,
    pub report: EvalReport,
}

/// Runs all training steps and the evaluation. A pre-trained stage can be
/// passed in to share it between experiments.
pub fn run_experiment(cfg: &ExperimentConfig, pretrained: Option<AeStage>) -> Result<ExperimentResult> {
    cfg.validate()?;
    let pretrained = match pretrained {
        Some(p) => p,
        None => pretrain(cfg)?,
    };
    let finetuned = finetune(cfg, &pretrained.models)?;
    let features = extract(cfg, &finetuned.models)?;
    let mlp = fit_mlp(cfg, &features)?;
    let dev_scores = score_table(&mlp.best, &features, Subset::Dev)?;
    let eval_scores = score_table(&mlp.best, &features, Subset::Eval)?;
    let report = evaluate(&dev_scores, &eval_scores)?;
    Ok(ExperimentResult {
        pretrained,
        finetuned,
        features,
        mlp,
        dev_scores,
        eval_scores,
        report,
    })
}
