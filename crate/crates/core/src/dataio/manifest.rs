use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{AttackCategory, Label, Subset, FORMAT_VERSION};
use crate::error::{PadError, Result};
use crate::models::write_atomic;
use crate::preproc::EyePair;

pub const DEFAULT_PATH_TEMPLATE: &str = "{sample_id}/{channel}/{frame:03}.png";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Rgb,
    Nir,
    Depth,
}

impl Channel {
    pub fn name(self) -> &'static str {
        match self {
            Channel::Rgb => "rgb",
            Channel::Nir => "nir",
            Channel::Depth => "depth",
        }
    }
}

/// One video (or still) of the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub format_version: u32,
    pub sample_id: String,
    pub subset: Subset,
    pub label: Label,
    pub attack_category: AttackCategory,
    pub identity_id: String,
    pub frame_count: usize,
    /// Path template per channel, relative to the manifest directory.
    pub channels: BTreeMap<Channel, String>,
    /// Eye landmarks of every frame.
    pub eyes: Vec<EyePair>,
}

impl SampleRecord {
    /// Resolved path of one channel image.
    pub fn frame_path(&self, root: &Path, channel: Channel, frame: usize) -> Option<PathBuf> {
        let template = self.channels.get(&channel)?;
        let rel = template
            .replace("{sample_id}", &self.sample_id)
            .replace("{channel}", channel.name())
            .replace("{frame:03}", &format!("{frame:03}"))
            .replace("{frame}", &frame.to_string());
        Some(root.join(rel))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// 1-based manifest line, when the problem belongs to one row.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

pub fn parse_manifest(text: &str) -> Result<Vec<SampleRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: SampleRecord = serde_json::from_str(line)
            .map_err(|e| PadError::Validation(format!("manifest line {}: {e}", i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn load_manifest(path: &Path) -> Result<Vec<SampleRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| PadError::io(path, e))?;
    parse_manifest(&text).map_err(|e| match e {
        PadError::Validation(m) => PadError::Validation(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn save_manifest(path: &Path, records: &[SampleRecord]) -> Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

/// Checks record invariants. Line numbers assume one record per line in order.
pub fn validate_manifest(records: &[SampleRecord]) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut seen_ids = HashSet::new();
    let mut identity_subset: HashMap<&str, (Subset, usize)> = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        let line = Some(i + 1);
        let mut push = |message: String| diags.push(Diagnostic { line, message });
        if r.format_version != FORMAT_VERSION {
            push(format!("unsupported format_version {}", r.format_version));
        }
        match (r.label, r.attack_category) {
            (Label::BonaFide, AttackCategory::None) => {}
            (Label::BonaFide, c) => push(format!("bona-fide sample {} has attack category {c}", r.sample_id)),
            (Label::Attack, AttackCategory::None) => push(format!("attack sample {} has category none", r.sample_id)),
            (Label::Attack, _) => {}
        }
        if r.sample_id.is_empty() {
            push("empty sample_id".into());
        }
        if !seen_ids.insert(r.sample_id.as_str()) {
            push(format!("duplicate sample_id {}", r.sample_id));
        }
        if r.frame_count == 0 {
            push(format!("sample {} has no frames", r.sample_id));
        }
        if r.eyes.len() != r.frame_count {
            push(format!(
                "sample {} has {} eye landmark pairs for {} frames",
                r.sample_id,
                r.eyes.len(),
                r.frame_count
            ));
        }
        if !r.channels.contains_key(&Channel::Rgb) {
            push(format!("sample {} lacks an rgb channel", r.sample_id));
        }
        if r.label == Label::BonaFide {
            match identity_subset.get(r.identity_id.as_str()) {
                Some(&(s, first)) if s != r.subset => push(format!(
                    "bona-fide identity {} appears in {s} (line {first}) and {}",
                    r.identity_id, r.subset
                )),
                Some(_) => {}
                None => {
                    identity_subset.insert(&r.identity_id, (r.subset, i + 1));
                }
            }
        }
    }
    diags
}

/// Reports every channel image referenced by the manifest that does not exist.
pub fn validate_files(records: &[SampleRecord], root: &Path) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    for (i, r) in records.iter().enumerate() {
        for &ch in r.channels.keys() {
            for f in 0..r.frame_count {
                let p = r.frame_path(root, ch, f).expect("channel present");
                if !p.is_file() {
                    diags.push(Diagnostic {
                        line: Some(i + 1),
                        message: format!("missing file {}", p.display()),
                    });
                }
            }
        }
    }
    diags
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, subset: Subset, label: Label, cat: AttackCategory, identity: &str) -> SampleRecord {
        SampleRecord {
            format_version: 1,
            sample_id: id.into(),
            subset,
            label,
            attack_category: cat,
            identity_id: identity.into(),
            frame_count: 2,
            channels: [(Channel::Rgb, DEFAULT_PATH_TEMPLATE.to_string())].into(),
            eyes: vec![EyePair::new((40.0, 50.0), (80.0, 50.0)); 2],
        }
    }

    #[test]
    fn empty_manifest() {
        let recs = parse_manifest("").unwrap();
        assert!(recs.is_empty());
        assert!(validate_manifest(&recs).is_empty());
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.jsonl");
        let recs = vec![
            record("a", Subset::Train, Label::BonaFide, AttackCategory::None, "i1"),
            record("b", Subset::Dev, Label::Attack, AttackCategory::FakeHead, "i1"),
        ];
        save_manifest(&p, &recs).unwrap();
        assert_eq!(load_manifest(&p).unwrap(), recs);
        assert!(validate_manifest(&recs).is_empty());
    }

    #[test]
    fn bona_fide_with_attack_category_flagged() {
        let recs = vec![record("a", Subset::Train, Label::BonaFide, AttackCategory::Print, "i1")];
        let d = validate_manifest(&recs);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].line, Some(1));
        assert!(d[0].message.contains("print"));
    }

    #[test]
    fn identity_leakage_flagged() {
        let recs = vec![
            record("a", Subset::Train, Label::BonaFide, AttackCategory::None, "i1"),
            record("b", Subset::Eval, Label::BonaFide, AttackCategory::None, "i1"),
        ];
        let d = validate_manifest(&recs);
        assert_eq!(d.len(), 1);
        assert!(d[0].to_string().starts_with("line 2:"), "{}", d[0]);
    }

    #[test]
    fn malformed_row_reports_line() {
        let good = serde_json::to_string(&record("a", Subset::Train, Label::BonaFide, AttackCategory::None, "i")).unwrap();
        let text = format!("{good}\n{{\"sample_id\": 3}}\n");
        let err = parse_manifest(&text).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn path_template() {
        let r = record("s1", Subset::Train, Label::BonaFide, AttackCategory::None, "i");
        let p = r.frame_path(Path::new("/data"), Channel::Rgb, 7).unwrap();
        assert_eq!(p, PathBuf::from("/data/s1/rgb/007.png"));
        assert!(r.frame_path(Path::new("/data"), Channel::Nir, 0).is_none());
    }
}
