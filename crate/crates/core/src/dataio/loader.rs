use std::path::Path;

use log::warn;

use super::imageio::{read_gray, read_rgb};
use super::manifest::{Channel, SampleRecord};
use super::{AttackCategory, Label, Subset};
use crate::error::{invalid, PadError, Result};
use crate::eval::frame_sample;
use crate::preproc::{
    baseline_crops, preprocess_frame, BaselineCrops, ChannelMode, McFaceImage, MultiChannelFrame, PreprocConfig,
};
use crate::trainer::LabeledFace;

/// Reads the channel images of one frame.
pub fn load_frame(record: &SampleRecord, root: &Path, frame: usize) -> Result<MultiChannelFrame> {
    if frame >= record.frame_count {
        return Err(invalid!(
            "frame {frame} out of range for {} ({} frames)",
            record.sample_id,
            record.frame_count
        ));
    }
    let eyes = *record
        .eyes
        .get(frame)
        .ok_or_else(|| invalid!("no eye landmarks for {} frame {frame}", record.sample_id))?;
    let rgb_path = record
        .frame_path(root, Channel::Rgb, frame)
        .ok_or_else(|| invalid!("{} has no rgb channel", record.sample_id))?;
    let gray = |c| record.frame_path(root, c, frame).map(|p| read_gray(&p)).transpose();
    Ok(MultiChannelFrame {
        rgb: read_rgb(&rgb_path)?,
        nir: gray(Channel::Nir)?,
        depth: gray(Channel::Depth)?,
        eyes,
        registered: true,
    })
}

fn missing_file(e: &PadError) -> bool {
    match e {
        PadError::Io { source, .. } => source.kind() == std::io::ErrorKind::NotFound,
        _ => false,
    }
}

/// Loads and preprocesses `frames_per_video` uniformly sampled frames of
/// every record. Frames with a missing channel file are skipped with a warning.
pub fn load_faces(
    records: &[SampleRecord],
    root: &Path,
    mode: ChannelMode,
    cfg: &PreprocConfig,
    frames_per_video: usize,
) -> Result<Vec<LabeledFace>> {
    let mut faces = Vec::new();
    for r in records {
        for f in frame_sample(r.frame_count, frames_per_video) {
            let frame = match load_frame(r, root, f) {
                Ok(frame) => frame,
                Err(e) if missing_file(&e) => {
                    warn!("skipping {} frame {f}: {e}", r.sample_id);
                    continue;
                }
                Err(e) => return Err(e.for_sample(&r.sample_id, f)),
            };
            let image = preprocess_frame(&frame, mode, cfg).map_err(|e| e.for_sample(&r.sample_id, f))?;
            faces.push(LabeledFace {
                face: McFaceImage::new(image, r.sample_id.clone(), f)?,
                label: r.label,
                subset: r.subset,
                category: r.attack_category,
            });
        }
    }
    Ok(faces)
}

#[derive(Debug, Clone)]
pub struct BaselineSample {
    pub sample_id: String,
    pub frame: usize,
    pub label: Label,
    pub subset: Subset,
    pub category: AttackCategory,
    pub crops: BaselineCrops,
}

/// Baseline crops of sampled frames; faces below the minimum size and frames
/// with missing files are skipped.
pub fn load_baseline_crops(
    records: &[SampleRecord],
    root: &Path,
    cfg: &PreprocConfig,
    frames_per_video: usize,
) -> Result<Vec<BaselineSample>> {
    let mut out = Vec::new();
    for r in records {
        for f in frame_sample(r.frame_count, frames_per_video) {
            let frame = match load_frame(r, root, f) {
                Ok(frame) => frame,
                Err(e) if missing_file(&e) => {
                    warn!("skipping {} frame {f}: {e}", r.sample_id);
                    continue;
                }
                Err(e) => return Err(e.for_sample(&r.sample_id, f)),
            };
            match baseline_crops(&frame, cfg).map_err(|e| e.for_sample(&r.sample_id, f))? {
                Some(crops) => out.push(BaselineSample {
                    sample_id: r.sample_id.clone(),
                    frame: f,
                    label: r.label,
                    subset: r.subset,
                    category: r.attack_category,
                    crops,
                }),
                None => warn!("skipping {} frame {f}: face smaller than the baseline minimum", r.sample_id),
            }
        }
    }
    Ok(out)
}
