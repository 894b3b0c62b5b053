//! Error rates, dev-set operating points, DET curves and frame sampling.
//!
//! Scores are P(attack); a sample is classified as an attack when its score is
//! at least the threshold.

mod files;

pub use files::{det_csv, det_svg, parse_scores, read_scores, scores_csv, write_det_csv, write_det_svg, write_report, write_scores};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataio::{AttackCategory, Label, FORMAT_VERSION};
use crate::error::{invalid, PadError, Result};

/// Frames per video in the evaluation protocol.
pub const FRAMES_PER_VIDEO: usize = 10;
/// APCER targets of the BPCER20 and BPCER100 operating points.
pub const APCER_TARGET_20: f64 = 0.05;
pub const APCER_TARGET_100: f64 = 0.01;
/// Threshold above every valid score.
pub const ABOVE_ALL_SCORES: f64 = 1.0 + f64::EPSILON;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub sample_id: String,
    pub frame: usize,
    pub score: f64,
    pub label: Label,
    pub category: Option<AttackCategory>,
}

impl ScoreEntry {
    pub fn new(sample_id: impl Into<String>, frame: usize, score: f64, label: Label, category: Option<AttackCategory>) -> Result<Self> {
        if !(0.0..=1.0).contains(&score) {
            return Err(invalid!("score {score} outside [0, 1]"));
        }
        Ok(ScoreEntry {
            sample_id: sample_id.into(),
            frame,
            score,
            label,
            category,
        })
    }
}

fn class_scores(entries: &[ScoreEntry], label: Label) -> Vec<f64> {
    entries.iter().filter(|e| e.label == label).map(|e| e.score).collect()
}

/// Fraction of attacks scored below `tau` (accepted as bona fide).
pub fn apcer_of(attack_scores: &[f64], tau: f64) -> Result<f64> {
    if attack_scores.is_empty() {
        return Err(PadError::Validation("APCER needs at least one attack score".into()));
    }
    Ok(attack_scores.iter().filter(|&&s| s < tau).count() as f64 / attack_scores.len() as f64)
}

/// Fraction of bona-fide samples scored at or above `tau`.
pub fn bpcer_of(bona_scores: &[f64], tau: f64) -> Result<f64> {
    if bona_scores.is_empty() {
        return Err(PadError::Validation("BPCER needs at least one bona-fide score".into()));
    }
    Ok(bona_scores.iter().filter(|&&s| s >= tau).count() as f64 / bona_scores.len() as f64)
}

pub fn apcer(entries: &[ScoreEntry], tau: f64) -> Result<f64> {
    apcer_of(&class_scores(entries, Label::Attack), tau)
}

pub fn bpcer(entries: &[ScoreEntry], tau: f64) -> Result<f64> {
    bpcer_of(&class_scores(entries, Label::BonaFide), tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub tau: f64,
    /// False when no candidate met the APCER target and `tau` fell back to
    /// the smallest dev score.
    pub attainable: bool,
}

/// Largest candidate threshold (distinct dev scores and 0) whose dev APCER
/// does not exceed `target`.
pub fn threshold_at_apcer(dev: &[ScoreEntry], target: f64) -> Result<Threshold> {
    if !(0.0..=1.0).contains(&target) {
        return Err(invalid!("APCER target {target} outside [0, 1]"));
    }
    let mut attacks = class_scores(dev, Label::Attack);
    if attacks.is_empty() {
        return Err(PadError::Validation("dev scores contain no attacks".into()));
    }
    attacks.sort_by(f64::total_cmp);
    let mut candidates: Vec<f64> = dev.iter().map(|e| e.score).chain([0.0]).collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let n = attacks.len() as f64;
    for &tau in candidates.iter().rev() {
        let below = attacks.partition_point(|&s| s < tau);
        if below as f64 / n <= target {
            return Ok(Threshold { tau, attainable: true });
        }
    }
    Ok(Threshold {
        tau: candidates[0],
        attainable: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetPoint {
    pub threshold: f64,
    pub apcer: f64,
    pub bpcer: f64,
}

/// One point per distinct score plus the boundaries 0 and [`ABOVE_ALL_SCORES`],
/// sorted by threshold.
pub fn det_points(entries: &[ScoreEntry]) -> Result<Vec<DetPoint>> {
    let mut attacks = class_scores(entries, Label::Attack);
    let mut bona = class_scores(entries, Label::BonaFide);
    if attacks.is_empty() || bona.is_empty() {
        return Err(PadError::Validation("DET needs both classes".into()));
    }
    attacks.sort_by(f64::total_cmp);
    bona.sort_by(f64::total_cmp);
    let mut taus: Vec<f64> = entries.iter().map(|e| e.score).chain([0.0, ABOVE_ALL_SCORES]).collect();
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    let (na, nb) = (attacks.len() as f64, bona.len() as f64);
    Ok(taus
        .into_iter()
        .map(|tau| DetPoint {
            threshold: tau,
            apcer: attacks.partition_point(|&s| s < tau) as f64 / na,
            bpcer: (bona.len() - bona.partition_point(|&s| s < tau)) as f64 / nb,
        })
        .collect())
}

/// Equal error rate: mean of APCER and BPCER at the DET point where they are closest.
pub fn eer(entries: &[ScoreEntry]) -> Result<f64> {
    let points = det_points(entries)?;
    let best = points
        .iter()
        .min_by(|a, b| (a.apcer - a.bpcer).abs().total_cmp(&(b.apcer - b.bpcer).abs()))
        .expect("boundary points exist");
    Ok((best.apcer + best.bpcer) / 2.0)
}

/// `k` uniformly spaced frame indices `floor(i·F/k)`, deduplicated.
pub fn frame_sample(frame_count: usize, k: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..k).map(|i| i * frame_count / k).collect();
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub apcer_target: f64,
    pub tau: f64,
    pub attainable: bool,
    pub eval_apcer: f64,
    pub eval_bpcer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format_version: u32,
    pub bpcer20: OperatingPoint,
    pub bpcer100: OperatingPoint,
    pub det: Vec<DetPoint>,
    /// APCER per attack category at the BPCER20 and BPCER100 thresholds.
    pub per_category_apcer: BTreeMap<String, [f64; 2]>,
}

fn operating_point(dev: &[ScoreEntry], eval: &[ScoreEntry], target: f64) -> Result<OperatingPoint> {
    let th = threshold_at_apcer(dev, target)?;
    Ok(OperatingPoint {
        apcer_target: target,
        tau: th.tau,
        attainable: th.attainable,
        eval_apcer: apcer(eval, th.tau)?,
        eval_bpcer: bpcer(eval, th.tau)?,
    })
}

/// Selects both thresholds on `dev` and reports error rates on `eval`.
pub fn evaluate(dev: &[ScoreEntry], eval: &[ScoreEntry]) -> Result<EvalReport> {
    for (name, set) in [("dev", dev), ("eval", eval)] {
        let has = |l| set.iter().any(|e| e.label == l);
        if !has(Label::Attack) || !has(Label::BonaFide) {
            return Err(PadError::Validation(format!("{name} scores must contain both classes")));
        }
    }
    let bpcer20 = operating_point(dev, eval, APCER_TARGET_20)?;
    let bpcer100 = operating_point(dev, eval, APCER_TARGET_100)?;
    let mut per_category_apcer = BTreeMap::new();
    let mut cats: Vec<AttackCategory> = eval
        .iter()
        .filter(|e| e.label == Label::Attack)
        .filter_map(|e| e.category)
        .collect();
    cats.sort();
    cats.dedup();
    for c in cats {
        let scores: Vec<f64> = eval
            .iter()
            .filter(|e| e.label == Label::Attack && e.category == Some(c))
            .map(|e| e.score)
            .collect();
        per_category_apcer.insert(
            c.to_string(),
            [apcer_of(&scores, bpcer20.tau)?, apcer_of(&scores, bpcer100.tau)?],
        );
    }
    Ok(EvalReport {
        format_version: FORMAT_VERSION,
        bpcer20,
        bpcer100,
        det: det_points(eval)?,
        per_category_apcer,
    })
}
