//! Hand-crafted per-channel baseline: quality measures on RGB, MCT
//! histograms on NIR, LBP histograms on depth, one logistic regression per
//! channel and a logistic-regression score fusion trained on dev scores.

mod iqm;
mod lr;
mod texture;

pub use iqm::{iqm_features, IQM_DIM, PSNR_CAP};
pub use lr::{lr_train, lr_train_traced, LrModel, ZNorm, LR_L2, LR_MAX_ITER, LR_TOL};
pub use texture::{lbp_code, lbp_histogram, mct_code, mct_histogram, CodeType, HistogramFeature};

use serde::{Deserialize, Serialize};

use crate::dataio::{BaselineSample, Label, Subset};
use crate::error::{PadError, Result};
use crate::eval::ScoreEntry;
use crate::preproc::BaselineCrops;

/// Spatial grid of the depth LBP histogram.
pub const LBP_GRID: (usize, usize) = (2, 2);
/// Spatial grid of the NIR MCT histogram.
pub const MCT_GRID: (usize, usize) = (1, 1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineChannel {
    Rgb,
    Nir,
    Depth,
}

impl BaselineChannel {
    pub const ALL: [BaselineChannel; 3] = [BaselineChannel::Rgb, BaselineChannel::Nir, BaselineChannel::Depth];

    pub fn name(self) -> &'static str {
        match self {
            BaselineChannel::Rgb => "rgb",
            BaselineChannel::Nir => "nir",
            BaselineChannel::Depth => "depth",
        }
    }

    pub fn features(self, crops: &BaselineCrops) -> Result<Vec<f64>> {
        match self {
            BaselineChannel::Rgb => Ok(iqm_features(&crops.rgb)?.to_vec()),
            BaselineChannel::Nir => Ok(mct_histogram(&crops.nir, MCT_GRID.0, MCT_GRID.1)?.values),
            BaselineChannel::Depth => Ok(lbp_histogram(&crops.depth, LBP_GRID.0, LBP_GRID.1)?.values),
        }
    }
}

fn check_aligned(channels: &[Vec<ScoreEntry>]) -> Result<()> {
    let first = channels
        .first()
        .ok_or_else(|| PadError::Validation("no channel scores to fuse".into()))?;
    for ch in &channels[1..] {
        if ch.len() != first.len()
            || ch
                .iter()
                .zip(first)
                .any(|(a, b)| a.sample_id != b.sample_id || a.frame != b.frame || a.label != b.label)
        {
            return Err(PadError::Validation("channel scores are not aligned by sample id and frame".into()));
        }
    }
    Ok(())
}

fn stacked(channels: &[Vec<ScoreEntry>]) -> Vec<Vec<f64>> {
    (0..channels[0].len())
        .map(|i| channels.iter().map(|c| c[i].score).collect())
        .collect()
}

/// Score-level fusion: a logistic regression over stacked channel scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionModel {
    pub lr: LrModel,
}

impl FusionModel {
    /// Trains on dev-set channel scores.
    pub fn train(dev_channels: &[Vec<ScoreEntry>]) -> Result<Self> {
        check_aligned(dev_channels)?;
        let labels: Vec<Label> = dev_channels[0].iter().map(|e| e.label).collect();
        Ok(FusionModel {
            lr: lr_train(&stacked(dev_channels), &labels)?,
        })
    }

    pub fn apply(&self, channels: &[Vec<ScoreEntry>]) -> Result<Vec<ScoreEntry>> {
        check_aligned(channels)?;
        if channels.len() != self.lr.dim() {
            return Err(PadError::Validation(format!(
                "fusion trained on {} channels, given {}",
                self.lr.dim(),
                channels.len()
            )));
        }
        stacked(channels)
            .iter()
            .zip(&channels[0])
            .map(|(x, e)| ScoreEntry::new(e.sample_id.clone(), e.frame, self.lr.predict(x)?, e.label, e.category))
            .collect()
    }
}

/// Trains the fusion on dev channel scores and returns fused eval scores.
pub fn fuse_scores(dev_channels: &[Vec<ScoreEntry>], eval_channels: &[Vec<ScoreEntry>]) -> Result<Vec<ScoreEntry>> {
    FusionModel::train(dev_channels)?.apply(eval_channels)
}

/// Per-channel and fused scores for the dev and eval subsets.
#[derive(Debug, Clone)]
pub struct BaselineScores {
    pub channels: Vec<(BaselineChannel, Vec<ScoreEntry>, Vec<ScoreEntry>)>,
    pub fused_dev: Vec<ScoreEntry>,
    pub fused_eval: Vec<ScoreEntry>,
    pub models: Vec<(BaselineChannel, LrModel)>,
    pub fusion: FusionModel,
}

fn subset_rows(samples: &[BaselineSample], subset: Subset) -> Vec<&BaselineSample> {
    samples.iter().filter(|s| s.subset == subset).collect()
}

/// Trains the channel classifiers on `train`, scores `dev` and `eval`, and
/// fuses with a model trained on dev scores only.
pub fn run_baseline(samples: &[BaselineSample]) -> Result<BaselineScores> {
    let train = subset_rows(samples, Subset::Train);
    let dev = subset_rows(samples, Subset::Dev);
    let eval = subset_rows(samples, Subset::Eval);
    let mut channels = Vec::new();
    let mut models = Vec::new();
    for ch in BaselineChannel::ALL {
        let feats = |rows: &[&BaselineSample]| -> Result<Vec<Vec<f64>>> {
            rows.iter()
                .map(|s| ch.features(&s.crops).map_err(|e| e.for_sample(&s.sample_id, s.frame)))
                .collect()
        };
        let labels: Vec<Label> = train.iter().map(|s| s.label).collect();
        let model = lr_train(&feats(&train)?, &labels)?;
        let score = |rows: &[&BaselineSample]| -> Result<Vec<ScoreEntry>> {
            feats(rows)?
                .iter()
                .zip(rows)
                .map(|(f, s)| ScoreEntry::new(s.sample_id.clone(), s.frame, model.predict(f)?, s.label, Some(s.category)))
                .collect()
        };
        channels.push((ch, score(&dev)?, score(&eval)?));
        models.push((ch, model));
    }
    let dev_scores: Vec<Vec<ScoreEntry>> = channels.iter().map(|c| c.1.clone()).collect();
    let eval_scores: Vec<Vec<ScoreEntry>> = channels.iter().map(|c| c.2.clone()).collect();
    let fusion = FusionModel::train(&dev_scores)?;
    Ok(BaselineScores {
        fused_dev: fusion.apply(&dev_scores)?,
        fused_eval: fusion.apply(&eval_scores)?,
        channels,
        models,
        fusion,
    })
}
