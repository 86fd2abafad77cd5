//! The `vishier` command line. One subcommand per stage plus `pipeline` and
//! `compare`; stage parameters default to the loaded config.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dataset::{load_embeddings, split_dataset, write_embeddings};
use crate::detection::{evaluate_recognition, nms_per_image, sweep_thresholds, Interpolation};
use crate::detections::{load_detections, load_ground_truth, write_detections, write_ground_truth};
use crate::error::{Error, Result};
use crate::hierarchy::{build_hierarchy, Hierarchy, Preference};
use crate::jsonl;
use crate::multitask::{evaluate_classification, train, write_log_csv, MultiTaskModel};
use crate::pipeline::{initial_model, run_full_pipeline, write_comparison, PipelineConfig};
use crate::similarity::{similarity_matrix, SimilarityMatrix};
use crate::synth::{synthesize_dataset, synthesize_detections, SyntheticDetectionSpec, SyntheticSpec};

#[derive(Debug, Parser)]
#[command(name = "vishier", version, about = "Visual-aware category hierarchies and recognition metrics")]
pub struct Cli {
    /// TOML config, or a manifest.json from an earlier run.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides every seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate planted-group embeddings (and optionally boxes).
    Synth(SynthArgs),
    /// Stratified train/val/test split of an embeddings file.
    Split(SplitArgs),
    /// Category similarity matrix from training embeddings.
    Similarity(SimilarityArgs),
    /// Cluster a similarity matrix into a category hierarchy.
    Hierarchy(HierarchyArgs),
    /// Train the multi-task classifier heads.
    Train(TrainArgs),
    /// Top-1 and cluster top-1 of a trained model.
    EvalClassify(EvalClassifyArgs),
    /// Per-image non-maximum suppression.
    Nms(NmsArgs),
    /// Localization precision/recall/F-measure over score thresholds.
    Sweep(SweepArgs),
    /// Recognition precision/recall/F-measure, accuracy and mAP.
    EvalRecognition(EvalRecognitionArgs),
    /// Run every stage and write all artifacts plus a manifest.
    Pipeline,
    /// Compare flat, hierarchical and fine-tuned hierarchical heads.
    Compare,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub categories: Option<usize>,
    #[arg(long)]
    pub groups: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    /// Also write detections.jsonl and ground_truth.jsonl.
    #[arg(long)]
    pub detections: bool,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Train, val and test fractions, e.g. `0.7,0.1,0.2`.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub ratios: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct SimilarityArgs {
    #[arg(long)]
    pub train: PathBuf,
    /// Min-max rescale the off-diagonal entries.
    #[arg(long)]
    pub rescale: bool,
}

#[derive(Debug, Args)]
pub struct HierarchyArgs {
    #[arg(long)]
    pub sim: PathBuf,
    #[arg(long)]
    pub levels: Option<usize>,
    /// `median` or a number.
    #[arg(long)]
    pub preference: Option<Preference>,
    #[arg(long)]
    pub damping: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub val: PathBuf,
    #[arg(long)]
    pub hier: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub fine_tune_epochs: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct EvalClassifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub hier: PathBuf,
}

#[derive(Debug, Args)]
pub struct NmsArgs {
    #[arg(long)]
    pub detections: PathBuf,
    /// IoU above which the lower-scoring box is suppressed.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub detections: PathBuf,
    #[arg(long)]
    pub ground_truth: PathBuf,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub iou_min: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InterpolationArg {
    AllPoint,
    ElevenPoint,
}

impl From<InterpolationArg> for Interpolation {
    fn from(arg: InterpolationArg) -> Self {
        match arg {
            InterpolationArg::AllPoint => Interpolation::AllPoint,
            InterpolationArg::ElevenPoint => Interpolation::ElevenPoint,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalRecognitionArgs {
    #[arg(long)]
    pub detections: PathBuf,
    #[arg(long)]
    pub ground_truth: PathBuf,
    /// Score threshold; the sweep's best threshold when omitted.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub iou_min: Option<f64>,
    #[arg(long, value_enum)]
    pub interpolation: Option<InterpolationArg>,
}

/// Parses `std::env::args`, runs the command and maps the outcome to an
/// exit code: 0 on success, 1 for bad input, 2 when a stage fails.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 1 } else { 2 })
        }
    }
}

fn resolve_config(cli: &Cli, fallback: impl FnOnce() -> PipelineConfig) -> Result<PipelineConfig> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => fallback(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.out = out.clone();
    }
    Ok(config)
}

fn create_out(config: &PipelineConfig) -> Result<&Path> {
    let out = config.out.as_path();
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    Ok(out)
}

pub fn run(cli: Cli) -> Result<()> {
    let fallback = match cli.command {
        Command::Pipeline | Command::Compare => PipelineConfig::synthetic_example,
        _ => PipelineConfig::default,
    };
    let config = resolve_config(&cli, fallback)?;
    match cli.command {
        Command::Synth(args) => synth(&config, args),
        Command::Split(args) => split(&config, args),
        Command::Similarity(args) => similarity(&config, args),
        Command::Hierarchy(args) => hierarchy(&config, args),
        Command::Train(args) => train_cmd(&config, args),
        Command::EvalClassify(args) => eval_classify(&config, args),
        Command::Nms(args) => nms(&config, args),
        Command::Sweep(args) => sweep(&config, args),
        Command::EvalRecognition(args) => eval_recognition(&config, args),
        Command::Pipeline => {
            let summary = run_full_pipeline(&config)?;
            for note in &summary.notes {
                println!("note: {note}");
            }
            println!(
                "top1 {:.4}  cluster_top1 {:.4}",
                summary.classification.top1, summary.classification.cluster_top1
            );
            if let Some(r) = &summary.recognition {
                println!(
                    "precision {:.4}  recall {:.4}  f_measure {:.4}  map {:.4}",
                    r.precision, r.recall, r.f_measure, r.map
                );
            }
            println!("wrote {} artifacts to {}", summary.artifacts.len(), summary.out.display());
            Ok(())
        }
        Command::Compare => {
            let report = write_comparison(&config)?;
            print!("{}", report.to_markdown());
            Ok(())
        }
    }
}

fn stage<T>(name: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| e.in_stage(name))
}

fn synth(config: &PipelineConfig, args: SynthArgs) -> Result<()> {
    let base = config.synthetic.clone().unwrap_or_default();
    let spec = SyntheticSpec {
        n_categories: args.categories.unwrap_or(base.n_categories),
        n_groups: args.groups.unwrap_or(base.n_groups),
        dim: args.dim.unwrap_or(base.dim),
        samples_per_category: args.samples.unwrap_or(base.samples_per_category),
        noise_sigma: args.noise.unwrap_or(base.noise_sigma),
        seed: config.seed,
        ..base
    };
    let out = create_out(config)?;
    let data = stage("synth", || synthesize_dataset(&spec))?;
    write_embeddings(out.join("embeddings.jsonl"), &data.dataset)?;
    jsonl::write_json(&out.join("groups.json"), &data.groups)?;
    println!("{} records, {} categories", data.dataset.len(), data.dataset.n_categories());
    if args.detections || config.synthetic_detections.is_some() {
        let spec = SyntheticDetectionSpec {
            seed: config.seed,
            ..config.synthetic_detections.clone().unwrap_or_default()
        };
        let (dets, gts) = stage("synth", || synthesize_detections(&spec))?;
        write_detections(out.join("detections.jsonl"), &dets)?;
        write_ground_truth(out.join("ground_truth.jsonl"), &gts)?;
        println!("{} detections, {} ground-truth boxes", dets.len(), gts.len());
    }
    Ok(())
}

fn split(config: &PipelineConfig, args: SplitArgs) -> Result<()> {
    let path = args
        .embeddings
        .or_else(|| config.data.embeddings.clone())
        .ok_or_else(|| Error::Config("split needs --embeddings or data.embeddings".into()))?;
    let mut spec = config.split_spec();
    if let Some(r) = args.ratios {
        spec.ratios = [r[0], r[1], r[2]];
    }
    spec.validate()?;
    let ds = load_embeddings(&path)?;
    let parts = stage("split", || split_dataset(&ds, &spec))?;
    let out = create_out(config)?;
    write_embeddings(out.join("train.jsonl"), &parts.train)?;
    write_embeddings(out.join("val.jsonl"), &parts.val)?;
    write_embeddings(out.join("test.jsonl"), &parts.test)?;
    println!("train {}  val {}  test {}", parts.train.len(), parts.val.len(), parts.test.len());
    Ok(())
}

fn similarity(config: &PipelineConfig, args: SimilarityArgs) -> Result<()> {
    let mut options = config.similarity;
    options.rescale |= args.rescale;
    let ds = load_embeddings(&args.train)?;
    let sim = stage("similarity", || similarity_matrix(&ds, options))?;
    let out = create_out(config)?;
    sim.save(out.join("sim.json"))?;
    sim.write_csv(out.join("sim.csv"))?;
    println!("{} categories", sim.len());
    Ok(())
}

fn hierarchy(config: &PipelineConfig, args: HierarchyArgs) -> Result<()> {
    let mut params = config.hierarchy.ap;
    if let Some(p) = args.preference {
        params.preference = p;
    }
    if let Some(d) = args.damping {
        params.damping = d;
    }
    let levels = args.levels.unwrap_or(config.hierarchy.levels);
    let sim = SimilarityMatrix::load(&args.sim)?;
    let h = stage("hierarchy", || build_hierarchy(&sim, levels, &params))?;
    let out = create_out(config)?;
    h.save(out.join("hier.json"))?;
    println!("level sizes {:?}", h.level_sizes());
    Ok(())
}

fn train_cmd(config: &PipelineConfig, args: TrainArgs) -> Result<()> {
    let mut config = config.clone();
    if let Some(e) = args.epochs {
        config.train.epochs = e;
    }
    if let Some(e) = args.fine_tune_epochs {
        config.train.fine_tune_epochs = e;
    }
    if args.hidden.is_some() {
        config.model.hidden = args.hidden;
    }
    if let Some(l) = args.lambdas {
        config.model.lambdas = l;
    }
    let train_set = load_embeddings(&args.train)?;
    let val_set = load_embeddings(&args.val)?;
    let h = Hierarchy::load(&args.hier)?;
    let outcome = stage("train", || {
        let model = initial_model(&config, train_set.dim(), &h)?;
        train(&model, &train_set, &val_set, &h, &config.train_config())
    })?;
    let out = create_out(&config)?;
    outcome.model.save(out.join("model.json"))?;
    write_log_csv(out.join("train_log.csv"), &outcome.log)?;
    println!("best epoch {}", outcome.best_epoch);
    Ok(())
}

fn eval_classify(config: &PipelineConfig, args: EvalClassifyArgs) -> Result<()> {
    let model = MultiTaskModel::load(&args.model)?;
    let test = load_embeddings(&args.test)?;
    let h = Hierarchy::load(&args.hier)?;
    let metrics = stage("eval-classify", || evaluate_classification(&model, &test, &h))?;
    let out = create_out(config)?;
    jsonl::write_json(&out.join("classification.json"), &metrics)?;
    println!("top1 {:.4}  cluster_top1 {:.4}", metrics.top1, metrics.cluster_top1);
    Ok(())
}

fn nms(config: &PipelineConfig, args: NmsArgs) -> Result<()> {
    let threshold = args.threshold.unwrap_or(config.eval.nms_threshold);
    let dets = load_detections(&args.detections)?;
    let kept = stage("nms", || nms_per_image(&dets, threshold))?;
    let out = create_out(config)?;
    write_detections(out.join("detections_nms.jsonl"), &kept)?;
    println!("{} -> {} detections", dets.len(), kept.len());
    Ok(())
}

fn sweep(config: &PipelineConfig, args: SweepArgs) -> Result<()> {
    let points = args.points.unwrap_or(config.eval.sweep_points);
    let iou_min = args.iou_min.unwrap_or(config.eval.iou_min);
    let dets = load_detections(&args.detections)?;
    let gts = load_ground_truth(&args.ground_truth)?;
    let table = stage("sweep", || sweep_thresholds(&dets, &gts, points, iou_min))?;
    let out = create_out(config)?;
    table.write_csv(out.join("sweep.csv"))?;
    print!("{}", table.to_csv());
    println!("best threshold {}", table.best_threshold);
    Ok(())
}

fn eval_recognition(config: &PipelineConfig, args: EvalRecognitionArgs) -> Result<()> {
    let iou_min = args.iou_min.unwrap_or(config.eval.iou_min);
    let interpolation = args.interpolation.map(Into::into).unwrap_or(config.eval.interpolation);
    let dets = load_detections(&args.detections)?;
    let gts = load_ground_truth(&args.ground_truth)?;
    let threshold = match args.threshold {
        Some(t) => t,
        None => {
            stage("sweep", || sweep_thresholds(&dets, &gts, config.eval.sweep_points, iou_min))?
                .best_threshold
        }
    };
    let report = stage("eval-recognition", || {
        evaluate_recognition(&dets, &gts, threshold, iou_min, interpolation)
    })?;
    let out = create_out(config)?;
    jsonl::write_json(&out.join("metrics.json"), &report)?;
    println!(
        "threshold {threshold}  precision {:.4}  recall {:.4}  f_measure {:.4}  accuracy {:.4}  map {:.4}",
        report.precision, report.recall, report.f_measure, report.accuracy, report.map
    );
    Ok(())
}
