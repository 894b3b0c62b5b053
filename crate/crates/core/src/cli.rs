//! Command-line front end. Exit codes: 0 success, 1 usage or validation
//! error, 2 filesystem error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

use crate::baseline::run_baseline;
use crate::dataio::{load_baseline_crops, synth_generate, write_rgb, SynthConfig, Subset};
use crate::error::{PadError, Result};
use crate::eval::{det_points, evaluate, read_scores, write_det_csv, write_det_svg, write_report, write_scores};
use crate::models::{write_atomic, MlpModel};
use crate::pipeline::{
    extract, finetune, fit_mlp, load_autoencoders, load_experiment_faces, load_valid_manifest, pretrain,
    save_autoencoders, score_table, ExperimentConfig,
};
use crate::trainer::FeatureTable;

#[derive(Debug, Parser)]
#[command(name = "mcpad", version, about = "Multi-channel face presentation attack detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the master seed of the configuration
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic multi-channel and RGB datasets
    Synth(Common),
    /// Write preprocessed 128×128 faces as PNG files
    Preprocess(Common),
    /// Pre-train one autoencoder per region on RGB faces
    TrainAe(Common),
    /// Fine-tune pre-trained autoencoders on multi-channel faces
    FinetuneAe {
        #[command(flatten)]
        common: Common,
        /// Directory holding the pre-trained autoencoders
        #[arg(long)]
        models: PathBuf,
    },
    /// Write latent features of every sampled frame as CSV
    Extract {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        models: PathBuf,
    },
    /// Train the MLP classifier with dev-set restart selection
    TrainMlp {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        features: PathBuf,
    },
    /// Score the dev and eval subsets
    Score {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        mlp: PathBuf,
    },
    /// Run the hand-crafted baseline with score fusion
    Baseline(Common),
    /// Select thresholds on dev scores and report eval error rates
    Eval {
        #[arg(long)]
        dev: PathBuf,
        #[arg(long)]
        eval: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write DET points and plot of a scores file
    Det {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn experiment_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.train.master_seed = seed;
    }
    Ok(cfg)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Synth(c) => {
            let mut cfg = match &c.config {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| PadError::io(p, e))?;
                    serde_json::from_str::<SynthConfig>(&text)
                        .map_err(|e| PadError::Validation(format!("{}: {e}", p.display())))?
                }
                None => SynthConfig::default(),
            };
            if let Some(seed) = c.seed {
                cfg.seed = seed;
            }
            synth_generate(&cfg, &c.out)?;
        }
        Command::Preprocess(c) => {
            let cfg = experiment_config(&c)?;
            let faces = load_experiment_faces(&cfg, cfg.frames_per_video, |_| true)?;
            let mut index = String::from("sample_id,frame,label,subset,category,path\n");
            for f in &faces {
                let rel = format!("{}/{:03}.png", f.face.sample_id, f.face.frame);
                write_rgb(&c.out.join(&rel), &f.face.image)?;
                index.push_str(&format!(
                    "{},{},{},{},{},{rel}\n",
                    f.face.sample_id, f.face.frame, f.label, f.subset, f.category
                ));
            }
            write_atomic(&c.out.join("faces.csv"), index.as_bytes())?;
        }
        Command::TrainAe(c) => {
            let cfg = experiment_config(&c)?;
            let stage = pretrain(&cfg)?;
            save_autoencoders(&c.out, &stage.models)?;
            write_json(&c.out.join("loss_history.json"), &stage.loss_history)?;
        }
        Command::FinetuneAe { common, models } => {
            let cfg = experiment_config(&common)?;
            let pretrained = load_autoencoders(&models, cfg.train.regions)?;
            let stage = finetune(&cfg, &pretrained)?;
            save_autoencoders(&common.out, &stage.models)?;
            write_json(&common.out.join("loss_history.json"), &stage.loss_history)?;
        }
        Command::Extract { common, models } => {
            let cfg = experiment_config(&common)?;
            let models = load_autoencoders(&models, cfg.train.regions)?;
            extract(&cfg, &models)?.save(&common.out.join("features.csv"))?;
        }
        Command::TrainMlp { common, features } => {
            let cfg = experiment_config(&common)?;
            let table = FeatureTable::load(&features)?;
            let fit = fit_mlp(&cfg, &table)?;
            fit.best.save(&common.out.join("mlp.mcae"))?;
            write_json(
                &common.out.join("mlp_restarts.json"),
                &serde_json::json!({
                    "format_version": crate::dataio::FORMAT_VERSION,
                    "best_restart": fit.best_restart,
                    "dev_bce": fit.dev_losses,
                }),
            )?;
        }
        Command::Score { common, models, mlp } => {
            let cfg = experiment_config(&common)?;
            let models = load_autoencoders(&models, cfg.train.regions)?;
            let mlp = MlpModel::load(&mlp)?;
            let table = extract(&cfg, &models)?;
            write_scores(&common.out.join("scores_dev.csv"), &score_table(&mlp, &table, Subset::Dev)?)?;
            write_scores(&common.out.join("scores_eval.csv"), &score_table(&mlp, &table, Subset::Eval)?)?;
        }
        Command::Baseline(c) => {
            let cfg = experiment_config(&c)?;
            let records = load_valid_manifest(&cfg.mc_manifest)?;
            let root = cfg.mc_manifest.parent().unwrap_or(Path::new(""));
            let samples = load_baseline_crops(&records, root, &cfg.preproc, cfg.frames_per_video)?;
            let scores = run_baseline(&samples)?;
            for (ch, dev, eval) in &scores.channels {
                write_scores(&c.out.join(format!("baseline_{}_dev.csv", ch.name())), dev)?;
                write_scores(&c.out.join(format!("baseline_{}_eval.csv", ch.name())), eval)?;
            }
            write_scores(&c.out.join("fused_dev.csv"), &scores.fused_dev)?;
            write_scores(&c.out.join("fused_eval.csv"), &scores.fused_eval)?;
            write_report(&c.out.join("report.json"), &evaluate(&scores.fused_dev, &scores.fused_eval)?)?;
        }
        Command::Eval { dev, eval, out } => {
            let report = evaluate(&read_scores(&dev)?, &read_scores(&eval)?)?;
            write_report(&out.join("report.json"), &report)?;
            write_det_csv(&out.join("det.csv"), &report.det)?;
            write_det_svg(&out.join("det.svg"), &report.det)?;
            info!(
                "BPCER20 {:.4} (APCER {:.4}), BPCER100 {:.4} (APCER {:.4})",
                report.bpcer20.eval_bpcer, report.bpcer20.eval_apcer, report.bpcer100.eval_bpcer, report.bpcer100.eval_apcer
            );
        }
        Command::Det { scores, out } => {
            let points = det_points(&read_scores(&scores)?)?;
            write_det_csv(&out.join("det.csv"), &points)?;
            write_det_svg(&out.join("det.svg"), &points)?;
        }
    }
    Ok(())
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io() {
                2
            } else {
                1
            }
        }
    }
}
