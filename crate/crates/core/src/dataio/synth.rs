//! Synthetic multi-channel dataset with planted presentation-attack cues.
//!
//! Faces are elliptical blobs with eyes, brows, mouth and an identity texture.
//! Bona-fide captures have a curved depth profile with a nose and NIR skin
//! texture; flat attacks reuse the same visible appearance on a planar
//! medium with weak NIR structure; masks are curved but texture-less in NIR;
//! glasses add an anomalous rectangle over the eyes in every channel.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::imageio::{write_gray, write_rgb};
use super::manifest::{save_manifest, Channel, SampleRecord, DEFAULT_PATH_TEMPLATE};
use super::{AttackCategory, Label, Subset, FORMAT_VERSION};
use crate::error::{invalid, Result};
use crate::models::write_atomic;
use crate::preproc::{quantize_u8, EyePair, Image8};
use crate::trainer::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CueStrengths {
    /// 1 makes flat attacks perfectly planar in depth, 0 gives them a face-like bulge.
    pub depth_flatness: f64,
    /// Blend weight between bona-fide and attack NIR appearance.
    pub nir_shift: f64,
    /// Opacity of the glasses rectangle.
    pub patch_anomaly: f64,
}

impl Default for CueStrengths {
    fn default() -> Self {
        CueStrengths {
            depth_flatness: 1.0,
            nir_shift: 1.0,
            patch_anomaly: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub format_version: u32,
    pub seed: u64,
    pub image_size: usize,
    pub frames_per_video: usize,
    /// Bona-fide identities (one video each) per subset.
    pub bona_fide_per_subset: usize,
    /// Attack videos per category per subset.
    pub attacks_per_category: usize,
    /// Still RGB faces for autoencoder pre-training.
    pub rgb_identities: usize,
    pub cues: CueStrengths,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            format_version: FORMAT_VERSION,
            seed: 0,
            image_size: 128,
            frames_per_video: 10,
            bona_fide_per_subset: 20,
            attacks_per_category: 2,
            rgb_identities: 100,
            cues: CueStrengths::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(invalid!("unsupported format_version {}", self.format_version));
        }
        if self.image_size < 64 {
            return Err(invalid!("image_size must be at least 64"));
        }
        if self.frames_per_video == 0 || self.bona_fide_per_subset == 0 || self.attacks_per_category == 0 {
            return Err(invalid!("every subset needs frames, bona-fide and attack videos"));
        }
        let c = self.cues;
        for v in [c.depth_flatness, c.nir_shift, c.patch_anomaly] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid!("cue strengths must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Appearance shared by every capture of one identity.
#[derive(Debug, Clone)]
struct IdentityLook {
    eye_dist: f64,
    aspect: f64,
    tone: [f64; 3],
    background: [f64; 3],
    waves: Vec<(f64, f64, f64, f64)>,
    texture_seed: u64,
}

impl IdentityLook {
    fn sample(rng: &mut ChaCha8Rng, size: f64) -> Self {
        let base = rng.gen_range(0.45..0.85);
        let tone = [
            base * rng.gen_range(1.0..1.15),
            base * rng.gen_range(0.85..1.0),
            base * rng.gen_range(0.7..0.9),
        ];
        let background = [rng.gen_range(0.1..0.6), rng.gen_range(0.1..0.6), rng.gen_range(0.1..0.6)];
        let eye_dist = size * rng.gen_range(0.28..0.33);
        let waves = (0..6)
            .map(|_| {
                let freq = rng.gen_range(2.0..7.0) * 2.0 * PI / (2.0 * eye_dist);
                let dir = rng.gen_range(0.0..PI);
                (freq * dir.cos(), freq * dir.sin(), rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.005..0.02))
            })
            .collect();
        IdentityLook {
            eye_dist,
            aspect: rng.gen_range(1.15..1.35),
            tone,
            background,
            waves,
            texture_seed: rng.gen(),
        }
    }
}

/// Head pose of one frame.
#[derive(Debug, Clone, Copy)]
struct Pose {
    cx: f64,
    cy: f64,
    angle: f64,
    gain: f64,
}

/// Channel images and exact eye landmarks of one rendered frame.
#[derive(Debug, Clone)]
pub struct RenderedFrame {
    pub rgb: Image8,
    pub nir: Image8,
    pub depth: Image8,
    pub eyes: EyePair,
}

fn hash2(seed: u64, x: i64, y: i64) -> f64 {
    let h = derive_seed(seed, x as u64, (y as u64).wrapping_mul(0x2545_F491_4F6C_DD1D));
    (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

/// Lattice value noise in [-1, 1] with cell size `cell`.
fn value_noise(seed: u64, u: f64, v: f64, cell: f64) -> f64 {
    let (x, y) = (u / cell, v / cell);
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (i, j) = (x0 as i64, y0 as i64);
    let a = hash2(seed, i, j);
    let b = hash2(seed, i + 1, j);
    let c = hash2(seed, i, j + 1);
    let d = hash2(seed, i + 1, j + 1);
    (a * (1.0 - fx) + b * fx) * (1.0 - fy) + (c * (1.0 - fx) + d * fx) * fy
}

const NIR_BACKGROUND: f64 = 0.3;

fn gauss(dx: f64, dy: f64, sx: f64, sy: f64) -> f64 {
    (-0.5 * ((dx / sx).powi(2) + (dy / sy).powi(2))).exp()
}

fn render(look: &IdentityLook, pose: Pose, category: AttackCategory, cues: CueStrengths, size: usize, rng: &mut ChaCha8Rng) -> RenderedFrame {
    let d = look.eye_dist;
    let rx = 1.1 * d;
    let ry = rx * look.aspect;
    let eye_v = -0.4 * d;
    let (sin, cos) = pose.angle.sin_cos();
    let noise = Normal::new(0.0, 1.0).expect("valid");
    let n = size * size;
    let mut rgb = vec![0u8; 3 * n];
    let mut nir = vec![0u8; n];
    let mut depth = vec![0u8; n];

    let flat = category.is_2d();
    let mask = matches!(
        category,
        AttackCategory::FakeHead | AttackCategory::RigidMask | AttackCategory::FlexibleMask
    );
    let s = cues.nir_shift;

    for y in 0..size {
        for x in 0..size {
            let (px, py) = (x as f64 - pose.cx, y as f64 - pose.cy);
            // Face-local coordinates.
            let u = cos * px + sin * py;
            let v = -sin * px + cos * py;
            let r2 = (u / rx).powi(2) + (v / ry).powi(2);
            let shade = (1.0 - r2).max(0.0).sqrt();
            let edge = ((1.0 - r2) / 0.08).clamp(0.0, 1.0);

            let eyes = gauss(u - d / 2.0, v - eye_v, 0.09 * d, 0.07 * d) + gauss(u + d / 2.0, v - eye_v, 0.09 * d, 0.07 * d);
            let pupils = gauss(u - d / 2.0, v - eye_v, 0.04 * d, 0.04 * d) + gauss(u + d / 2.0, v - eye_v, 0.04 * d, 0.04 * d);
            let brows = gauss(u - d / 2.0, v - eye_v + 0.22 * d, 0.2 * d, 0.045 * d)
                + gauss(u + d / 2.0, v - eye_v + 0.22 * d, 0.2 * d, 0.045 * d);
            let nose = gauss(u, v - eye_v - 0.5 * d, 0.12 * d, 0.2 * d);
            let mouth = gauss(u, v - eye_v - 0.95 * d, 0.25 * d, 0.055 * d);
            let texture: f64 = look.waves.iter().map(|&(fu, fv, ph, a)| a * (fu * u + fv * v + ph).sin()).sum();
            let pores = value_noise(look.texture_seed, u, v, 2.5);

            // Visible albedo of the face (what a print or screen reproduces).
            let mut albedo = 0.8 + 0.15 * shade + texture * 4.0 - 0.55 * eyes - 0.35 * brows - 0.35 * mouth - 0.05 * nose;
            if mask {
                albedo = 0.82 + 0.12 * shade + texture - 0.3 * eyes - 0.1 * brows - 0.15 * mouth;
            }

            let on_medium = (u / rx).abs() < 1.35 && (v / ry).abs() < 1.3;
            let in_glasses = category == AttackCategory::Glasses
                && u.abs() < 0.9 * d
                && (v - eye_v).abs() < 0.17 * d;

            // Visible channels.
            let idx = y * size + x;
            for c in 0..3 {
                let bg = look.background[c] * (0.9 + 0.2 * y as f64 / size as f64);
                let mut val = bg * (1.0 - edge) + look.tone[c] * albedo * edge;
                if in_glasses {
                    val = val * (1.0 - cues.patch_anomaly) + 0.12 * cues.patch_anomaly;
                }
                val = val * pose.gain + 0.012 * noise.sample(rng);
                rgb[c * n + idx] = quantize_u8(val * 255.0);
            }

            // Near infrared.
            let bona_nir = NIR_BACKGROUND * (1.0 - edge)
                + edge * (0.5 + 0.2 * shade + 0.12 * pores + 2.0 * texture - 0.4 * pupils - 0.1 * brows);
            let attack_nir = match category {
                AttackCategory::Print | AttackCategory::PaperMask if on_medium => {
                    0.45 + 0.15 * (albedo * edge + 0.5 * (1.0 - edge) - 0.8)
                }
                AttackCategory::Replay if on_medium => 0.2,
                _ if mask => NIR_BACKGROUND * (1.0 - edge) + edge * (0.55 + 0.2 * shade - 0.1 * eyes),
                _ => bona_nir,
            };
            let mut nir_v = (1.0 - s) * bona_nir + s * attack_nir;
            if in_glasses {
                nir_v = nir_v * (1.0 - cues.patch_anomaly) + 0.9 * cues.patch_anomaly;
            }
            nir[idx] = quantize_u8((nir_v + 0.012 * noise.sample(rng)) * 255.0);

            // Depth (nearness, 0 = no return).
            let face_depth = 0.45 + 0.35 * shade + 0.12 * nose - 0.05 * eyes;
            let mut z = if flat {
                if on_medium {
                    let tilt = 0.04 * (u / rx) + 0.03 * (v / ry);
                    let bulge = (1.0 - cues.depth_flatness) * 0.35 * shade;
                    0.55 + tilt + bulge
                } else {
                    0.0
                }
            } else if r2 < 1.0 {
                match category {
                    AttackCategory::FakeHead => 0.45 + 0.35 * shade,
                    AttackCategory::RigidMask => 0.45 + 0.35 * shade + 0.04 * nose,
                    AttackCategory::FlexibleMask => 0.45 + 0.35 * shade + 0.07 * nose - 0.02 * eyes,
                    _ => face_depth,
                }
            } else {
                0.0
            };
            if in_glasses {
                z = z * (1.0 - cues.patch_anomaly) + 0.88 * cues.patch_anomaly;
            }
            if z > 0.0 {
                z = (z + 0.006 * noise.sample(rng)).max(1.0 / 255.0);
            }
            depth[idx] = quantize_u8(z * 255.0);
        }
    }

    let eye = |side: f64| {
        let (u, v) = (side * d / 2.0, eye_v);
        (pose.cx + cos * u - sin * v, pose.cy + sin * u + cos * v)
    };
    RenderedFrame {
        rgb: Image8::new(size, size, 3, rgb).expect("sized"),
        nir: Image8::new(size, size, 1, nir).expect("sized"),
        depth: Image8::new(size, size, 1, depth).expect("sized"),
        eyes: EyePair::new(eye(-1.0), eye(1.0)),
    }
}

fn sample_pose(rng: &mut ChaCha8Rng, size: f64, still: bool) -> Pose {
    let (jitter, tilt) = if still { (6.0, 0.15) } else { (2.0, 0.06) };
    Pose {
        cx: size / 2.0 + rng.gen_range(-jitter..jitter),
        cy: size / 2.0 + rng.gen_range(-jitter..jitter),
        angle: rng.gen_range(-tilt..tilt),
        gain: rng.gen_range(0.94..1.06),
    }
}

/// Renders one frame of a video. Exposed for tests and examples.
pub fn render_frame(seed: u64, category: AttackCategory, cues: CueStrengths, size: usize, frame: usize) -> RenderedFrame {
    let mut id_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_IDENTITY, 0));
    let look = IdentityLook::sample(&mut id_rng, size as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_FRAME, frame as u64));
    let pose = sample_pose(&mut rng, size as f64, false);
    render(&look, pose, category, cues, size, &mut rng)
}

const STREAM_IDENTITY: u64 = 101;
const STREAM_FRAME: u64 = 102;
const STREAM_STILL: u64 = 103;

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub mc_manifest: PathBuf,
    pub rgb_manifest: PathBuf,
    pub mc_records: Vec<SampleRecord>,
    pub rgb_records: Vec<SampleRecord>,
}

struct Video {
    sample_id: String,
    subset: Subset,
    category: AttackCategory,
    identity: usize,
}

fn plan(cfg: &SynthConfig) -> Vec<Video> {
    let mut videos = Vec::new();
    let mut next_identity = 0;
    for subset in Subset::ALL {
        let first = next_identity;
        for i in 0..cfg.bona_fide_per_subset {
            videos.push(Video {
                sample_id: format!("{subset}_bona_{i:03}"),
                subset,
                category: AttackCategory::None,
                identity: next_identity,
            });
            next_identity += 1;
        }
        // Attacks reuse identities of the same subset, round-robin.
        let mut k = 0;
        for category in AttackCategory::ATTACKS {
            for i in 0..cfg.attacks_per_category {
                videos.push(Video {
                    sample_id: format!("{subset}_{category}_{i:03}"),
                    subset,
                    category,
                    identity: first + k % cfg.bona_fide_per_subset,
                });
                k += 1;
            }
        }
    }
    videos
}

fn identity_look(cfg: &SynthConfig, identity: usize) -> IdentityLook {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_IDENTITY, identity as u64));
    IdentityLook::sample(&mut rng, cfg.image_size as f64)
}

/// Writes the multi-channel dataset to `out/mc` and the RGB-only stills to
/// `out/rgb`, each with a `manifest.jsonl`.
pub fn synth_generate(cfg: &SynthConfig, out: &Path) -> Result<SynthOutput> {
    cfg.validate()?;
    let size = cfg.image_size;
    let mc_root = out.join("mc");
    let rgb_root = out.join("rgb");
    let templates = |channels: &[Channel]| {
        channels
            .iter()
            .map(|&c| (c, DEFAULT_PATH_TEMPLATE.to_string()))
            .collect()
    };

    let mut mc_records = Vec::new();
    for (vi, video) in plan(cfg).iter().enumerate() {
        let look = identity_look(cfg, video.identity);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_FRAME, vi as u64));
        let mut record = SampleRecord {
            format_version: FORMAT_VERSION,
            sample_id: video.sample_id.clone(),
            subset: video.subset,
            label: if video.category == AttackCategory::None {
                Label::BonaFide
            } else {
                Label::Attack
            },
            attack_category: video.category,
            identity_id: format!("id{:04}", video.identity),
            frame_count: cfg.frames_per_video,
            channels: templates(&[Channel::Rgb, Channel::Nir, Channel::Depth]),
            eyes: Vec::with_capacity(cfg.frames_per_video),
        };
        for f in 0..cfg.frames_per_video {
            let pose = sample_pose(&mut rng, size as f64, false);
            let frame = render(&look, pose, video.category, cfg.cues, size, &mut rng);
            let path = |c| record.frame_path(&mc_root, c, f).expect("channel present");
            write_rgb(&path(Channel::Rgb), &frame.rgb)?;
            write_gray(&path(Channel::Nir), &frame.nir)?;
            write_gray(&path(Channel::Depth), &frame.depth)?;
            record.eyes.push(frame.eyes);
        }
        mc_records.push(record);
    }

    let mut rgb_records = Vec::new();
    for i in 0..cfg.rgb_identities {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_STILL, i as u64));
        let look = IdentityLook::sample(&mut rng, size as f64);
        let pose = sample_pose(&mut rng, size as f64, true);
        let frame = render(&look, pose, AttackCategory::None, cfg.cues, size, &mut rng);
        let record = SampleRecord {
            format_version: FORMAT_VERSION,
            sample_id: format!("still_{i:04}"),
            subset: Subset::Train,
            label: Label::BonaFide,
            attack_category: AttackCategory::None,
            identity_id: format!("still{i:04}"),
            frame_count: 1,
            channels: templates(&[Channel::Rgb]),
            eyes: vec![frame.eyes],
        };
        write_rgb(&record.frame_path(&rgb_root, Channel::Rgb, 0).expect("rgb"), &frame.rgb)?;
        rgb_records.push(record);
    }

    let mc_manifest = mc_root.join("manifest.jsonl");
    let rgb_manifest = rgb_root.join("manifest.jsonl");
    save_manifest(&mc_manifest, &mc_records)?;
    save_manifest(&rgb_manifest, &rgb_records)?;
    write_atomic(&out.join("synth_config.json"), serde_json::to_string_pretty(cfg)?.as_bytes())?;
    info!(
        "synthesized {} multi-channel videos and {} RGB stills under {}",
        mc_records.len(),
        rgb_records.len(),
        out.display()
    );
    Ok(SynthOutput {
        mc_manifest,
        rgb_manifest,
        mc_records,
        rgb_records,
    })
}
