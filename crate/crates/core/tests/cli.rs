use std::path::Path;
use std::process::{Command, Output};

fn mcpad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcpad"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const DEV: &str = "sample_id,frame,score,label,category
a1,0,0.9,attack,print
a2,0,0.8,attack,replay
a3,0,0.7,attack,rigid_mask
b1,0,0.1,bona-fide,
b2,0,0.3,bona-fide,
";

const EVAL: &str = "sample_id,frame,score,label,category
a1,0,0.95,attack,print
a2,0,0.5,attack,replay
b1,0,0.2,bona-fide,
b2,0,0.75,bona-fide,
";

#[test]
fn eval_writes_report_det_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let (dev, eval) = (dir.path().join("dev.csv"), dir.path().join("eval.csv"));
    std::fs::write(&dev, DEV).unwrap();
    std::fs::write(&eval, EVAL).unwrap();
    let out = dir.path().join("out");
    let o = mcpad(&["eval", "--dev", p(&dev), "--eval", p(&eval), "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    // Dev threshold for APCER ≤ 5% is the lowest attack score, 0.7.
    assert_eq!(report["bpcer20"]["tau"], 0.7);
    assert_eq!(report["bpcer20"]["eval_apcer"], 0.5);
    assert_eq!(report["bpcer20"]["eval_bpcer"], 0.5);
    assert_eq!(report["format_version"], 1);
    assert_eq!(report["per_category_apcer"]["replay"][0], 1.0);

    let det = std::fs::read_to_string(out.join("det.csv")).unwrap();
    assert_eq!(det.lines().count(), 1 + 4 + 2);
    assert!(std::fs::read_to_string(out.join("det.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn det_command_writes_points() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("s.csv");
    std::fs::write(&scores, DEV).unwrap();
    let o = mcpad(&["det", "--scores", p(&scores), "--out", p(dir.path())]);
    assert!(o.status.success());
    let det = std::fs::read_to_string(dir.path().join("det.csv")).unwrap();
    assert!(det.starts_with("threshold,apcer,bpcer"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(mcpad(&["--help"]).status.code(), Some(0));
    assert_eq!(mcpad(&["eval", "--bogus"]).status.code(), Some(1));
    assert_eq!(mcpad(&[]).status.code(), Some(1));

    let missing = dir.path().join("missing.csv");
    let o = mcpad(&["eval", "--dev", p(&missing), "--eval", p(&missing), "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.csv"));

    // A score outside [0, 1] is a validation error.
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, DEV.replace("0.9", "1.5")).unwrap();
    let o = mcpad(&["eval", "--dev", p(&bad), "--eval", p(&bad), "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(1));

    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"format_version": 7}"#).unwrap();
    let o = mcpad(&["train-ae", "--config", p(&cfg), "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("format_version"));
}

#[test]
fn synth_and_train_ae_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let synth_cfg = dir.path().join("synth.json");
    std::fs::write(
        &synth_cfg,
        r#"{"frames_per_video": 2, "bona_fide_per_subset": 2, "attacks_per_category": 1, "rgb_identities": 3}"#,
    )
    .unwrap();
    let exp_cfg = dir.path().join("exp.json");
    std::fs::write(
        &exp_cfg,
        r#"{"mc_manifest": "data/mc/manifest.jsonl", "rgb_manifest": "data/rgb/manifest.jsonl",
            "frames_per_video": 1, "train": {"epochs_pretrain": 1, "regions": 16}}"#,
    )
    .unwrap();
    let data = dir.path().join("data");
    assert!(mcpad(&["synth", "--config", p(&synth_cfg), "--out", p(&data)]).status.success());
    assert!(data.join("mc/manifest.jsonl").exists() && data.join("rgb/manifest.jsonl").exists());

    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = mcpad(&["train-ae", "--config", p(&exp_cfg), "--seed", seed, "--out", p(&out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (0..16)
            .map(|k| std::fs::read(out.join(format!("region_{k:02}.mcae"))).unwrap())
            .collect::<Vec<_>>()
    };
    let a = run("a", "3");
    assert_eq!(a, run("b", "3"));
    assert_ne!(a, run("c", "4"));
    let history: Vec<Vec<f64>> =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a/loss_history.json")).unwrap()).unwrap();
    assert_eq!(history.len(), 16);
    assert!(history.iter().all(|h| h.len() == 1 && h[0].is_finite()));
}
