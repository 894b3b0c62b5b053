use std::fmt::Write as _;
use std::path::Path;

use statrs::distribution::{ContinuousCDF, Normal};

use super::{DetPoint, EvalReport, ScoreEntry};
use crate::error::{PadError, Result};
use crate::models::write_atomic;

const SCORES_HEADER: &str = "sample_id,frame,score,label,category";

/// Scores CSV. Bona-fide rows carry the category `none`; an unknown category
/// is left empty.
pub fn scores_csv(entries: &[ScoreEntry]) -> String {
    let mut out = format!("{SCORES_HEADER}\n");
    for e in entries {
        let cat = e.category.map(|c| c.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{},{cat}", e.sample_id, e.frame, e.score, e.label).unwrap();
    }
    out
}

pub fn parse_scores(text: &str) -> Result<Vec<ScoreEntry>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        None => return Ok(Vec::new()),
        Some((_, h)) if h.trim() == SCORES_HEADER => {}
        Some((_, h)) => return Err(PadError::Validation(format!("unexpected scores header: {h}"))),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |what: &str| PadError::Validation(format!("scores line {}: {what}", i + 1));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad("expected 5 fields"));
        }
        let category = match f[4].trim() {
            "" => None,
            c => Some(c.parse().map_err(|_| bad("unknown category"))?),
        };
        let entry = ScoreEntry::new(
            f[0],
            f[1].parse().map_err(|_| bad("bad frame index"))?,
            f[2].parse().map_err(|_| bad("bad score"))?,
            f[3].parse().map_err(|_| bad("bad label"))?,
            category,
        )
        .map_err(|e| bad(&e.to_string()))?;
        out.push(entry);
    }
    Ok(out)
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| PadError::io(path, e))?;
    parse_scores(&text).map_err(|e| PadError::Validation(format!("{}: {e}", path.display())))
}

pub fn write_scores(path: &Path, entries: &[ScoreEntry]) -> Result<()> {
    write_atomic(path, scores_csv(entries).as_bytes())
}

pub fn det_csv(points: &[DetPoint]) -> String {
    let mut out = String::from("threshold,apcer,bpcer\n");
    for p in points {
        writeln!(out, "{},{},{}", p.threshold, p.apcer, p.bpcer).unwrap();
    }
    out
}

pub fn write_det_csv(path: &Path, points: &[DetPoint]) -> Result<()> {
    write_atomic(path, det_csv(points).as_bytes())
}

pub fn write_report(path: &Path, report: &EvalReport) -> Result<()> {
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    write_atomic(path, json.as_bytes())
}

/// DET plot on normal-deviate axes (APCER horizontal, BPCER vertical).
pub fn det_svg(points: &[DetPoint]) -> String {
    const W: f64 = 480.0;
    const MARGIN: f64 = 50.0;
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let (lo, hi) = (0.001, 0.999);
    let (zlo, zhi) = (normal.inverse_cdf(lo), normal.inverse_cdf(hi));
    let axis = |p: f64| (normal.inverse_cdf(p.clamp(lo, hi)) - zlo) / (zhi - zlo) * (W - 2.0 * MARGIN);

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{W}\" viewBox=\"0 0 {W} {W}\">\n\
         <rect width=\"{W}\" height=\"{W}\" fill=\"white\"/>\n"
    );
    for tick in [0.001, 0.01, 0.05, 0.2, 0.5, 0.8, 0.95, 0.99, 0.999] {
        let t = axis(tick);
        let (x, y) = (MARGIN + t, W - MARGIN - t);
        writeln!(
            svg,
            "<line x1=\"{x:.2}\" y1=\"{MARGIN}\" x2=\"{x:.2}\" y2=\"{b}\" stroke=\"#ddd\"/>\
             <line x1=\"{MARGIN}\" y1=\"{y:.2}\" x2=\"{b}\" y2=\"{y:.2}\" stroke=\"#ddd\"/>\
             <text x=\"{x:.2}\" y=\"{lx}\" font-size=\"9\" text-anchor=\"middle\">{pct}</text>\
             <text x=\"{ly}\" y=\"{y:.2}\" font-size=\"9\" text-anchor=\"end\">{pct}</text>",
            b = W - MARGIN,
            lx = W - MARGIN + 14.0,
            ly = MARGIN - 4.0,
            pct = tick * 100.0,
        )
        .unwrap();
    }
    let path: Vec<String> = points
        .iter()
        .map(|p| format!("{:.2},{:.2}", MARGIN + axis(p.apcer), W - MARGIN - axis(p.bpcer)))
        .collect();
    writeln!(
        svg,
        "<polyline fill=\"none\" stroke=\"#c00\" stroke-width=\"1.5\" points=\"{}\"/>",
        path.join(" ")
    )
    .unwrap();
    writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">APCER (%)</text>\
         <text x=\"12\" y=\"{}\" font-size=\"11\" transform=\"rotate(-90 12 {})\" text-anchor=\"middle\">BPCER (%)</text>",
        W / 2.0,
        W - 12.0,
        W / 2.0,
        W / 2.0
    )
    .unwrap();
    svg.push_str("</svg>\n");
    svg
}

pub fn write_det_svg(path: &Path, points: &[DetPoint]) -> Result<()> {
    write_atomic(path, det_svg(points).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{AttackCategory, Label};

    #[test]
    fn scores_round_trip() {
        let e = vec![
            ScoreEntry::new("a", 3, 0.125, Label::Attack, Some(AttackCategory::Print)).unwrap(),
            ScoreEntry::new("b", 0, 1.0 / 3.0, Label::BonaFide, Some(AttackCategory::None)).unwrap(),
            ScoreEntry::new("c", 9, 0.0, Label::Attack, None).unwrap(),
        ];
        let csv = scores_csv(&e);
        assert!(csv.starts_with("sample_id,frame,score,label,category\n"));
        assert_eq!(parse_scores(&csv).unwrap(), e);
    }

    #[test]
    fn bad_rows_report_line() {
        let text = "sample_id,frame,score,label,category\na,0,0.5,attack,print\nb,0,1.5,attack,print\n";
        let err = parse_scores(text).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn svg_is_well_formed() {
        let pts = [
            DetPoint { threshold: 0.0, apcer: 0.0, bpcer: 1.0 },
            DetPoint { threshold: 0.5, apcer: 0.1, bpcer: 0.2 },
            DetPoint { threshold: 1.0, apcer: 1.0, bpcer: 0.0 },
        ];
        let svg = det_svg(&pts);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("<polyline"));
    }
}
