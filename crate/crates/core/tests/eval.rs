use mcpad::dataio::Label;
use mcpad::eval::{det_points, eer, evaluate, frame_sample, threshold_at_apcer, ScoreEntry};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn uniform(rng: &mut ChaCha8Rng, n: usize, label: Label, tag: &str) -> Vec<ScoreEntry> {
    (0..n)
        .map(|i| ScoreEntry::new(format!("{tag}{i}"), 0, rng.gen_range(0.0..1.0), label, None).unwrap())
        .collect()
}

/// With indistinguishable classes the APCER-5% threshold rejects ~95% of bona fide.
#[test]
fn random_scores_give_bpcer20_near_095() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let n = 10_000;
    let mut dev = uniform(&mut rng, n, Label::Attack, "da");
    dev.extend(uniform(&mut rng, n, Label::BonaFide, "db"));
    let mut ev = uniform(&mut rng, n, Label::Attack, "ea");
    ev.extend(uniform(&mut rng, n, Label::BonaFide, "eb"));
    let report = evaluate(&dev, &ev).unwrap();
    assert!((report.bpcer20.eval_bpcer - 0.95).abs() <= 0.05, "{}", report.bpcer20.eval_bpcer);
}

#[test]
fn hand_examples() {
    let dev: Vec<ScoreEntry> = [0.1, 0.2, 0.6, 0.9]
        .iter()
        .enumerate()
        .map(|(i, &s)| ScoreEntry::new(format!("a{i}"), 0, s, Label::Attack, None).unwrap())
        .collect();
    assert_eq!(threshold_at_apcer(&dev, 0.25).unwrap().tau, 0.2);
    assert_eq!(frame_sample(300, 10), (0..10).map(|i| i * 30).collect::<Vec<_>>());
    assert_eq!(frame_sample(5, 10), vec![0, 1, 2, 3, 4]);
}

/// EER equals the brute-force crossing of the DET curve.
#[test]
fn eer_matches_crossing_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let mut e = uniform(&mut rng, 30, Label::BonaFide, "b");
        for (i, s) in (0..30).map(|_| rng.gen_range(0.2..1.0)).enumerate() {
            e.push(ScoreEntry::new(format!("a{i}"), 0, s, Label::Attack, None).unwrap());
        }
        let mut best = (f64::INFINITY, 0.0);
        for p in det_points(&e).unwrap() {
            let gap = (p.apcer - p.bpcer).abs();
            if gap < best.0 {
                best = (gap, (p.apcer + p.bpcer) / 2.0);
            }
        }
        assert_eq!(eer(&e).unwrap(), best.1);
        assert!(best.0 <= 1.0 / 30.0 + 1e-12);
    }
}
