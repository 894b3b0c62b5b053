use std::collections::BTreeMap;

use proptest::prelude::*;

use mcpad::baseline::{lbp_histogram, mct_histogram};
use mcpad::dataio::{parse_manifest, validate_manifest, AttackCategory, Channel, Label, SampleRecord, Subset, FORMAT_VERSION};
use mcpad::eval::{
    apcer_of, bpcer_of, det_points, parse_scores, scores_csv, threshold_at_apcer, ScoreEntry, ABOVE_ALL_SCORES,
};
use mcpad::models::{build_mlp_unchecked, MlpModel};
use mcpad::preproc::{mad_normalize, mad_normalize_values, EyePair, FloatPlane, Image8, Point};
use mcpad::trainer::{FeatureRow, FeatureTable};

fn nonzero_plane() -> impl Strategy<Value = FloatPlane> {
    (1usize..12, 1usize..12)
        .prop_flat_map(|(w, h)| (Just(w), Just(h), prop::collection::vec(prop_oneof![Just(0.0), 1.0..255.0f64], w * h)))
        .prop_map(|(w, h, mut data)| {
            data[0] = 42.0;
            FloatPlane::new(w, h, data).unwrap()
        })
}

fn labelled_scores() -> impl Strategy<Value = Vec<(f64, bool)>> {
    prop::collection::vec(((0u32..=50).prop_map(|k| f64::from(k) / 50.0), any::<bool>()), 2..60).prop_map(|mut v| {
        v[0].1 = true;
        v[1].1 = false;
        v
    })
}

fn entries(scores: &[(f64, bool)]) -> Vec<ScoreEntry> {
    scores
        .iter()
        .enumerate()
        .map(|(i, &(s, a))| {
            let (label, cat) = if a {
                (Label::Attack, Some(AttackCategory::Print))
            } else {
                (Label::BonaFide, None)
            };
            ScoreEntry::new(format!("id{i}"), i % 10, s, label, cat).unwrap()
        })
        .collect()
}

fn record(i: usize, subset: Subset, attack: bool) -> SampleRecord {
    let eye = EyePair {
        left: Point { x: 40.0, y: 50.0 },
        right: Point { x: 80.0, y: 50.0 },
    };
    SampleRecord {
        format_version: FORMAT_VERSION,
        sample_id: format!("s{i:03}"),
        subset,
        label: if attack { Label::Attack } else { Label::BonaFide },
        attack_category: if attack { AttackCategory::Replay } else { AttackCategory::None },
        identity_id: format!("{subset}-{i}"),
        frame_count: 2,
        channels: BTreeMap::from([(Channel::Rgb, "x.png".to_string())]),
        eyes: vec![eye; 2],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn mad_is_scale_invariant(plane in nonzero_plane(), c in 0.01..100.0f64, sigma in 0.5..8.0f64) {
        let scaled = FloatPlane::new(plane.width, plane.height, plane.data.iter().map(|v| v * c).collect()).unwrap();
        let (a, stats) = mad_normalize_values(&plane, sigma).unwrap();
        // The MAD := 1 substitution for flat images is not scale-free.
        prop_assume!(stats.mad > 0.0);
        let (b, _) = mad_normalize_values(&scaled, sigma).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
        }
    }

    #[test]
    fn mad_preserves_pixel_order(plane in nonzero_plane(), sigma in 0.5..8.0f64) {
        let out = mad_normalize(&plane, sigma).unwrap();
        for i in 0..plane.data.len() {
            for j in 0..plane.data.len() {
                if plane.data[i] <= plane.data[j] {
                    prop_assert!(out.data()[i] <= out.data()[j]);
                }
            }
        }
    }

    #[test]
    fn texture_codes_ignore_constant_shift(
        (w, h, pixels) in (4usize..14, 4usize..14).prop_flat_map(|(w, h)| (Just(w), Just(h), prop::collection::vec(0u8..200, w * h))),
        shift in 1u8..56,
    ) {
        let img = Image8::new(w, h, 1, pixels.clone()).unwrap();
        let shifted = Image8::new(w, h, 1, pixels.iter().map(|p| p + shift).collect()).unwrap();
        prop_assert_eq!(lbp_histogram(&img, 1, 1).unwrap(), lbp_histogram(&shifted, 1, 1).unwrap());
        prop_assert_eq!(mct_histogram(&img, 1, 1).unwrap(), mct_histogram(&shifted, 1, 1).unwrap());
    }

    #[test]
    fn error_rates_are_monotone_in_threshold(scores in labelled_scores(), t1 in 0.0..=1.0f64, t2 in 0.0..=1.0f64) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let attacks: Vec<f64> = scores.iter().filter(|s| s.1).map(|s| s.0).collect();
        let bona: Vec<f64> = scores.iter().filter(|s| !s.1).map(|s| s.0).collect();
        prop_assert!(apcer_of(&attacks, lo).unwrap() <= apcer_of(&attacks, hi).unwrap());
        prop_assert!(bpcer_of(&bona, lo).unwrap() >= bpcer_of(&bona, hi).unwrap());
    }

    #[test]
    fn selected_threshold_meets_target(scores in labelled_scores(), target in 0.0..=1.0f64) {
        let dev = entries(&scores);
        let t = threshold_at_apcer(&dev, target).unwrap();
        prop_assert!(t.attainable);
        let attacks: Vec<f64> = scores.iter().filter(|s| s.1).map(|s| s.0).collect();
        prop_assert!(apcer_of(&attacks, t.tau).unwrap() <= target);
        // No larger dev score would also meet the target.
        for &(s, _) in &scores {
            if s > t.tau {
                prop_assert!(apcer_of(&attacks, s).unwrap() > target);
            }
        }
    }

    #[test]
    fn det_curve_spans_both_corners(scores in labelled_scores()) {
        let det = det_points(&entries(&scores)).unwrap();
        let first = det.first().unwrap();
        let last = det.last().unwrap();
        prop_assert_eq!((first.threshold, first.apcer, first.bpcer), (0.0, 0.0, 1.0));
        prop_assert_eq!((last.threshold, last.apcer, last.bpcer), (ABOVE_ALL_SCORES, 1.0, 0.0));
        for w in det.windows(2) {
            prop_assert!(w[0].threshold < w[1].threshold);
            prop_assert!(w[0].apcer <= w[1].apcer && w[0].bpcer >= w[1].bpcer);
        }
    }

    #[test]
    fn scores_csv_round_trips(scores in labelled_scores()) {
        let e = entries(&scores);
        prop_assert_eq!(parse_scores(&scores_csv(&e)).unwrap(), e);
    }

    #[test]
    fn feature_csv_round_trips(values in prop::collection::vec(prop::num::f64::NORMAL, 1..40), dim in 1usize..5) {
        let rows: Vec<FeatureRow> = values
            .chunks(dim)
            .filter(|c| c.len() == dim)
            .enumerate()
            .map(|(i, c)| FeatureRow {
                sample_id: format!("v{i}"),
                frame: i,
                label: if i % 2 == 0 { Label::Attack } else { Label::BonaFide },
                subset: Subset::ALL[i % 3],
                category: if i % 2 == 0 { AttackCategory::RigidMask } else { AttackCategory::None },
                features: c.to_vec(),
            })
            .collect();
        prop_assume!(!rows.is_empty());
        let table = FeatureTable::new(rows).unwrap();
        prop_assert_eq!(FeatureTable::from_csv(&table.to_csv()).unwrap(), table);
    }

    #[test]
    fn mlp_container_round_trips(seed in any::<u64>(), input in 1usize..20, hidden in 1usize..8) {
        let m = build_mlp_unchecked(input, hidden, seed);
        let back = MlpModel::from_bytes(&m.to_bytes().unwrap()).unwrap();
        prop_assert_eq!(back.to_bytes().unwrap(), m.to_bytes().unwrap());
        let x: Vec<f64> = (0..input).map(|i| i as f64 * 0.1).collect();
        prop_assert_eq!(back.forward(&x).unwrap().to_bits(), m.forward(&x).unwrap().to_bits());
    }

    /// Corrupting one record of a valid manifest yields a diagnostic on its line.
    #[test]
    fn manifest_mutations_are_reported(target in 0usize..6, kind in 0usize..6) {
        let mut records: Vec<SampleRecord> = (0..6)
            .map(|i| record(i, Subset::ALL[i % 3], i % 2 == 1))
            .collect();
        prop_assert!(validate_manifest(&records).is_empty());
        let r = &mut records[target];
        match kind {
            0 => r.format_version += 1,
            1 => r.attack_category = if r.label == Label::Attack { AttackCategory::None } else { AttackCategory::Print },
            2 => r.frame_count = 3,
            3 => { r.channels.remove(&Channel::Rgb); }
            4 => r.sample_id.clear(),
            _ => r.sample_id = if target == 0 { "s001".into() } else { "s000".into() },
        }
        let diags = validate_manifest(&records);
        let line = if kind == 5 { target.max(1) } else { target } + 1;
        prop_assert!(diags.iter().any(|d| d.line == Some(line)), "{:?}", diags);
    }
}

#[test]
fn identity_leak_across_subsets_is_reported() {
    let mut records = vec![record(0, Subset::Train, false), record(1, Subset::Dev, false)];
    records[1].identity_id = records[0].identity_id.clone();
    let diags = validate_manifest(&records);
    assert_eq!(diags.len(), 1);
    assert_eq!(diags[0].line, Some(2));
    // Attacks may reuse an identity of another subset's bona-fide sample.
    records[1] = record(1, Subset::Dev, true);
    records[1].identity_id = records[0].identity_id.clone();
    assert!(validate_manifest(&records).is_empty());
}

#[test]
fn manifest_parse_errors_name_the_line() {
    let good = serde_json::to_string(&record(0, Subset::Train, false)).unwrap();
    let text = format!("{good}\n{{not json}}\n");
    let err = parse_manifest(&text).unwrap_err().to_string();
    assert!(err.contains("line 2"), "{err}");
}
