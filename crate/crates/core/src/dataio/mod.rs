//! Manifests, image files, the synthetic dataset generator and face loading.

mod imageio;
mod loader;
mod manifest;
mod synth;

pub use imageio::{read_gray, read_rgb, write_gray, write_rgb};
pub use loader::{load_baseline_crops, load_faces, load_frame, BaselineSample};
pub use manifest::{
    load_manifest, parse_manifest, save_manifest, validate_files, validate_manifest, Channel, Diagnostic,
    SampleRecord, DEFAULT_PATH_TEMPLATE,
};
pub use synth::{render_frame, synth_generate, CueStrengths, SynthConfig, SynthOutput};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, PadError, Result};

/// Version written into every persisted JSON artifact.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "bona-fide")]
    BonaFide,
    #[serde(rename = "attack")]
    Attack,
}

impl Label {
    /// Training target: 1 for attacks.
    pub fn target(self) -> f64 {
        match self {
            Label::BonaFide => 0.0,
            Label::Attack => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Train,
    Dev,
    Eval,
}

impl Subset {
    pub const ALL: [Subset; 3] = [Subset::Train, Subset::Dev, Subset::Eval];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackCategory {
    None,
    Glasses,
    FakeHead,
    Print,
    Replay,
    RigidMask,
    FlexibleMask,
    PaperMask,
}

impl AttackCategory {
    pub const ATTACKS: [AttackCategory; 7] = [
        AttackCategory::Glasses,
        AttackCategory::FakeHead,
        AttackCategory::Print,
        AttackCategory::Replay,
        AttackCategory::RigidMask,
        AttackCategory::FlexibleMask,
        AttackCategory::PaperMask,
    ];

    /// Flat presentation media: print, replay and paper masks.
    pub fn is_2d(self) -> bool {
        matches!(
            self,
            AttackCategory::Print | AttackCategory::Replay | AttackCategory::PaperMask
        )
    }
}

/// Display/FromStr mirror the serde names so CSV and JSON agree.
macro_rules! serde_str {
    ($ty:ty, $what:literal) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                match serde_json::to_value(self) {
                    Ok(serde_json::Value::String(s)) => f.write_str(&s),
                    _ => unreachable!("unit variants serialize to strings"),
                }
            }
        }

        impl FromStr for $ty {
            type Err = PadError;

            fn from_str(s: &str) -> Result<Self> {
                serde_json::from_value(serde_json::Value::String(s.to_string()))
                    .map_err(|_| invalid!(concat!("unknown ", $what, " '{}'"), s))
            }
        }
    };
}

serde_str!(Label, "label");
serde_str!(Subset, "subset");
serde_str!(AttackCategory, "attack category");
