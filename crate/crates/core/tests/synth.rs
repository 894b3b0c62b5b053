use mcpad::dataio::{
    load_frame, render_frame, synth_generate, validate_files, validate_manifest, AttackCategory, CueStrengths, Label,
    SynthConfig,
};
use mcpad::preproc::{baseline_crops, preprocess_frame, ChannelMode, PreprocConfig};

fn variance(values: &[u8]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    values.iter().map(|&v| (f64::from(v) - mean).powi(2)).sum::<f64>() / n
}

/// Depth variance over the central face region of a rendered frame.
fn face_depth_variance(category: AttackCategory, seed: u64) -> f64 {
    let f = render_frame(seed, category, CueStrengths::default(), 128, 0);
    let (l, r) = (f.eyes.left, f.eyes.right);
    let d = r.x - l.x;
    let (cx, cy) = ((l.x + r.x) / 2.0, l.y + 0.4 * d);
    let mut v = Vec::new();
    for y in (cy - 0.6 * d) as usize..(cy + 0.6 * d) as usize {
        for x in (cx - 0.6 * d) as usize..(cx + 0.6 * d) as usize {
            v.push(f.depth.get(0, y, x));
        }
    }
    variance(&v)
}

#[test]
fn flat_attacks_have_less_depth_relief_than_faces() {
    for seed in 0..5 {
        let bona = face_depth_variance(AttackCategory::None, seed);
        for cat in [AttackCategory::Print, AttackCategory::Replay, AttackCategory::PaperMask] {
            let flat = face_depth_variance(cat, seed);
            assert!(flat < bona, "seed {seed} {cat}: {flat} vs bona-fide {bona}");
        }
    }
}

#[test]
fn rendering_is_deterministic() {
    let a = render_frame(9, AttackCategory::RigidMask, CueStrengths::default(), 96, 3);
    let b = render_frame(9, AttackCategory::RigidMask, CueStrengths::default(), 96, 3);
    assert_eq!((&a.rgb, &a.nir, &a.depth), (&b.rgb, &b.nir, &b.depth));
    let c = render_frame(9, AttackCategory::RigidMask, CueStrengths::default(), 96, 4);
    assert_ne!(a.rgb, c.rgb);
}

#[test]
fn generated_dataset_is_valid_and_loadable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SynthConfig {
        frames_per_video: 2,
        bona_fide_per_subset: 2,
        attacks_per_category: 1,
        rgb_identities: 3,
        ..SynthConfig::default()
    };
    let out = synth_generate(&cfg, dir.path()).unwrap();
    assert!(validate_manifest(&out.mc_records).is_empty());
    assert!(validate_manifest(&out.rgb_records).is_empty());
    let mc_root = out.mc_manifest.parent().unwrap();
    assert!(validate_files(&out.mc_records, mc_root).is_empty());
    assert_eq!(out.mc_records.len(), 3 * (2 + AttackCategory::ATTACKS.len()));
    assert_eq!(out.rgb_records.len(), 3);
    assert!(out.rgb_records.iter().all(|r| r.label == Label::BonaFide));

    let frame = load_frame(&out.mc_records[0], mc_root, 1).unwrap();
    for mode in [ChannelMode::Mc, ChannelMode::Gray] {
        let face = preprocess_frame(&frame, mode, &PreprocConfig::default()).unwrap();
        assert_eq!((face.width(), face.height(), face.channels()), (128, 128, 3));
    }
    assert!(baseline_crops(&frame, &PreprocConfig::default()).unwrap().is_some());

    // Missing files are reported per path.
    std::fs::remove_file(out.mc_records[0].frame_path(mc_root, mcpad::dataio::Channel::Nir, 0).unwrap()).unwrap();
    assert_eq!(validate_files(&out.mc_records, mc_root).len(), 1);
}
