use std::fmt::Write as _;
use std::path::Path;

use crate::dataio::{AttackCategory, Label, Subset};
use crate::error::{shape_err, PadError, Result};
use crate::models::write_atomic;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub sample_id: String,
    pub frame: usize,
    pub label: Label,
    pub subset: Subset,
    pub category: AttackCategory,
    pub features: Vec<f64>,
}

/// Latent feature vectors, one row per (sample, frame), all of equal length.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureTable {
    pub rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn new(rows: Vec<FeatureRow>) -> Result<Self> {
        if let Some(first) = rows.first() {
            let d = first.features.len();
            if let Some(bad) = rows.iter().find(|r| r.features.len() != d) {
                return Err(shape_err!(
                    "feature rows differ in length: {d} vs {} ({} frame {})",
                    bad.features.len(),
                    bad.sample_id,
                    bad.frame
                ));
            }
        }
        Ok(FeatureTable { rows })
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, |r| r.features.len())
    }

    pub fn has_both_classes(&self) -> bool {
        let bona = self.rows.iter().any(|r| r.label == Label::BonaFide);
        let attack = self.rows.iter().any(|r| r.label == Label::Attack);
        bona && attack
    }

    pub fn subset(&self, subset: Subset) -> FeatureTable {
        FeatureTable {
            rows: self.rows.iter().filter(|r| r.subset == subset).cloned().collect(),
        }
    }

    /// CSV with header `sample_id,frame,label,subset,category,v0..v{d-1}`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sample_id,frame,label,subset,category");
        for i in 0..self.dim() {
            write!(out, ",v{i}").unwrap();
        }
        out.push('\n');
        for r in &self.rows {
            write!(out, "{},{},{},{},{}", r.sample_id, r.frame, r.label, r.subset, r.category).unwrap();
            for v in &r.features {
                // `{}` on f64 prints the shortest representation that round-trips.
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let header = match lines.next() {
            Some((_, h)) => h,
            None => return Ok(FeatureTable::default()),
        };
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 5 || cols[..5] != ["sample_id", "frame", "label", "subset", "category"] {
            return Err(PadError::Validation(format!("unexpected feature CSV header: {header}")));
        }
        let dim = cols.len() - 5;
        let mut rows = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |what: &str| PadError::Validation(format!("feature CSV line {}: {what}", i + 1));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != cols.len() {
                return Err(bad("wrong number of fields"));
            }
            let features = f[5..]
                .iter()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad("non-numeric feature"))?;
            debug_assert_eq!(features.len(), dim);
            rows.push(FeatureRow {
                sample_id: f[0].to_string(),
                frame: f[1].parse().map_err(|_| bad("bad frame index"))?,
                label: f[2].parse().map_err(|_| bad("bad label"))?,
                subset: f[3].parse().map_err(|_| bad("bad subset"))?,
                category: f[4].parse().map_err(|_| bad("bad category"))?,
                features,
            });
        }
        FeatureTable::new(rows)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| PadError::io(path, e))?;
        Self::from_csv(&text)
    }
}
