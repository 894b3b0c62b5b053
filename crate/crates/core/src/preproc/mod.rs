//! Turns registered RGB / NIR / depth frames into aligned, normalized,
//! stacked face images and their patch grids.

mod align;
mod face;
mod image;
mod mad;

pub use align::{align_face, EyePair, Point, EYE_ROW, LEFT_EYE_COL, RIGHT_EYE_COL};
pub use face::{
    extract_patches, image_to_tensor, stack_channels, to_grayscale, McFaceImage, Patch, PatchGrid,
    Regions, FACE_SIZE, PATCH_STRIDE,
};
pub use image::{quantize_u8, FloatPlane, Image8};
pub use mad::{mad_normalize, mad_normalize_values, mad_stats, median, MadStats, SIGMA_DEPTH, SIGMA_NIR};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape_err, Result};

/// Side of the per-channel crops used by the hand-crafted baseline.
pub const BASELINE_FACE_SIZE: usize = 64;
/// Baseline frames whose face box is smaller than this are discarded.
pub const BASELINE_MIN_FACE: f64 = 50.0;

/// Which planes make up the stacked face image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMode {
    /// BW, NIR, depth.
    #[default]
    Mc,
    /// R, G, B unchanged.
    Rgb,
    /// BW replicated into all three planes.
    Gray,
}

impl std::str::FromStr for ChannelMode {
    type Err = crate::PadError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mc" => Ok(ChannelMode::Mc),
            "rgb" => Ok(ChannelMode::Rgb),
            "gray" => Ok(ChannelMode::Gray),
            other => Err(invalid!("unknown channel mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocConfig {
    pub sigma_nir: f64,
    pub sigma_depth: f64,
}

impl Default for PreprocConfig {
    fn default() -> Self {
        PreprocConfig {
            sigma_nir: SIGMA_NIR,
            sigma_depth: SIGMA_DEPTH,
        }
    }
}

/// One capture: RGB plus optional NIR and depth planes registered to it.
#[derive(Debug, Clone)]
pub struct MultiChannelFrame {
    pub rgb: Image8,
    pub nir: Option<Image8>,
    pub depth: Option<Image8>,
    pub eyes: EyePair,
    pub registered: bool,
}

impl MultiChannelFrame {
    pub fn validate(&self) -> Result<()> {
        if self.rgb.channels() != 3 {
            return Err(invalid!("RGB frame has {} planes", self.rgb.channels()));
        }
        for (name, plane) in [("NIR", &self.nir), ("depth", &self.depth)] {
            if let Some(p) = plane {
                if p.channels() != 1 {
                    return Err(invalid!("{name} frame has {} planes", p.channels()));
                }
                if self.registered && !p.same_size(&self.rgb) {
                    return Err(shape_err!(
                        "{name} frame {}×{} not registered to RGB {}×{}",
                        p.width(),
                        p.height(),
                        self.rgb.width(),
                        self.rgb.height()
                    ));
                }
            }
        }
        if !self.eyes.inside(self.rgb.width(), self.rgb.height()) {
            return Err(invalid!("eye landmarks {:?} outside the frame", self.eyes));
        }
        Ok(())
    }

    fn require(&self, plane: &Option<Image8>, name: &str) -> Result<Image8> {
        plane
            .clone()
            .ok_or_else(|| invalid!("{name} channel required but missing"))
    }
}

fn aligned_u8(plane: &Image8, eyes: &EyePair, size: usize) -> Result<Image8> {
    Ok(align_face(&plane.to_float(0), eyes, size)?.quantize())
}

fn aligned_normalized(plane: &Image8, eyes: &EyePair, size: usize, sigma: f64) -> Result<Image8> {
    let cropped = align_face(&plane.to_float(0), eyes, size)?;
    mad_normalize(&cropped, sigma)
}

/// Full preprocessing chain for one frame: grayscale conversion, geometric
/// normalization, MAD normalization of NIR/depth on the cropped region, and
/// stacking.
pub fn preprocess_frame(frame: &MultiChannelFrame, mode: ChannelMode, cfg: &PreprocConfig) -> Result<Image8> {
    frame.validate()?;
    let eyes = &frame.eyes;
    match mode {
        ChannelMode::Mc => {
            let bw = aligned_u8(&to_grayscale(&frame.rgb)?, eyes, FACE_SIZE)?;
            let nir = aligned_normalized(&frame.require(&frame.nir, "NIR")?, eyes, FACE_SIZE, cfg.sigma_nir)?;
            let depth = aligned_normalized(&frame.require(&frame.depth, "depth")?, eyes, FACE_SIZE, cfg.sigma_depth)?;
            stack_channels(&bw, &nir, &depth)
        }
        ChannelMode::Rgb => {
            let planes: Vec<Image8> = (0..3)
                .map(|c| aligned_u8(&frame.rgb.channel(c), eyes, FACE_SIZE))
                .collect::<Result<_>>()?;
            stack_channels(&planes[0], &planes[1], &planes[2])
        }
        ChannelMode::Gray => {
            let bw = aligned_u8(&to_grayscale(&frame.rgb)?, eyes, FACE_SIZE)?;
            stack_channels(&bw, &bw, &bw)
        }
    }
}

/// Independent 64×64 crops per channel for the baseline.
#[derive(Debug, Clone)]
pub struct BaselineCrops {
    pub rgb: Image8,
    pub nir: Image8,
    pub depth: Image8,
}

/// Baseline preprocessing. Returns `None` when the face is smaller than the
/// minimum box size.
pub fn baseline_crops(frame: &MultiChannelFrame, cfg: &PreprocConfig) -> Result<Option<BaselineCrops>> {
    frame.validate()?;
    if frame.eyes.face_box_size() < BASELINE_MIN_FACE {
        return Ok(None);
    }
    let eyes = &frame.eyes;
    let s = BASELINE_FACE_SIZE;
    let planes: Vec<Image8> = (0..3)
        .map(|c| aligned_u8(&frame.rgb.channel(c), eyes, s))
        .collect::<Result<_>>()?;
    Ok(Some(BaselineCrops {
        rgb: stack_channels(&planes[0], &planes[1], &planes[2])?,
        nir: aligned_normalized(&frame.require(&frame.nir, "NIR")?, eyes, s, cfg.sigma_nir)?,
        depth: aligned_normalized(&frame.require(&frame.depth, "depth")?, eyes, s, cfg.sigma_depth)?,
    }))
}
