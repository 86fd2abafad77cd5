//! End-to-end runs: split, similarity, hierarchy, training, classification
//! evaluation and, when boxes are available, localization and recognition
//! evaluation. Every stage writes its artifact into the output directory and
//! a manifest records the resolved configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{load_embeddings, split_dataset, write_embeddings, LabeledDataset, Split, SplitSpec};
use crate::detection::{
    evaluate_recognition, nms_per_image, sweep_thresholds, Interpolation, RecognitionReport, SweepTable,
};
use crate::detections::{
    load_detections, load_ground_truth, write_detections, write_ground_truth, Detection, GroundTruthBox,
};
use crate::error::{Error, Result};
use crate::hierarchy::{build_hierarchy, ApParams, Hierarchy};
use crate::jsonl;
use crate::multitask::{
    evaluate_classification, train, write_log_csv, ClassificationMetrics, ModelSpec, MultiTaskModel,
    TrainConfig,
};
use crate::similarity::{similarity_matrix, SimilarityMatrix, SimilarityOptions};
use crate::synth::{synthesize_dataset, synthesize_detections, SyntheticDetectionSpec, SyntheticSpec};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub embeddings: Option<PathBuf>,
    pub detections: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub ratios: [f64; 3],
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            ratios: SplitSpec::default().ratios,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HierarchyConfig {
    pub levels: usize,
    #[serde(flatten)]
    pub ap: ApParams,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        Self {
            levels: 2,
            ap: ApParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Width of the shared ReLU layer; absent for direct heads.
    pub hidden: Option<usize>,
    /// One weight per trained level, level 1 first.
    pub lambdas: Vec<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: None,
            lambdas: crate::multitask::DEFAULT_LAMBDAS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub iou_min: f64,
    pub nms_threshold: f64,
    pub sweep_points: usize,
    pub interpolation: Interpolation,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_min: 0.5,
            nms_threshold: 0.7,
            sweep_points: 21,
            interpolation: Interpolation::AllPoint,
        }
    }
}

/// Complete run configuration. Every field has a default; the top-level
/// `seed` replaces the seeds of the synthetic, split and training sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub data: DataConfig,
    /// Generates the embeddings when `data.embeddings` is absent.
    pub synthetic: Option<SyntheticSpec>,
    /// Generates boxes when `data.detections`/`data.ground_truth` are absent.
    pub synthetic_detections: Option<SyntheticDetectionSpec>,
    pub split: SplitConfig,
    pub similarity: SimilarityOptions,
    pub hierarchy: HierarchyConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            data: DataConfig::default(),
            synthetic: None,
            synthetic_detections: None,
            split: SplitConfig::default(),
            similarity: SimilarityOptions::default(),
            hierarchy: HierarchyConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config: PipelineConfig,
    pub stages: Vec<StageRecord>,
    pub artifacts: Vec<String>,
}

impl PipelineConfig {
    /// Reads a TOML config, or a JSON run manifest (its `config` section).
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config = if path.extension().is_some_and(|e| e == "json") {
            let manifest: Manifest = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            manifest.config
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            ratios: self.split.ratios,
            seed: self.seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let config_err = |e: Error| Error::Config(e.to_string());
        self.split_spec().validate().map_err(config_err)?;
        self.hierarchy.ap.validate().map_err(config_err)?;
        if self.hierarchy.levels < 2 {
            return Err(Error::Config("hierarchy.levels must be at least 2".into()));
        }
        self.train.validate().map_err(config_err)?;
        if self.model.lambdas.is_empty() || self.model.lambdas.len() > self.hierarchy.levels {
            return Err(Error::Config(format!(
                "model.lambdas needs between 1 and {} entries",
                self.hierarchy.levels
            )));
        }
        let e = &self.eval;
        if !(e.iou_min > 0.0 && e.iou_min <= 1.0) || !(e.nms_threshold > 0.0 && e.nms_threshold <= 1.0) {
            return Err(Error::Config("IoU thresholds must lie in (0, 1]".into()));
        }
        if e.sweep_points < 2 {
            return Err(Error::Config("eval.sweep_points must be at least 2".into()));
        }
        if self.data.embeddings.is_none() && self.synthetic.is_none() {
            return Err(Error::Config(
                "either data.embeddings or a [synthetic] section is required".into(),
            ));
        }
        if self.data.detections.is_some() != self.data.ground_truth.is_some() {
            return Err(Error::Config(
                "data.detections and data.ground_truth must be given together".into(),
            ));
        }
        if let Some(s) = &self.synthetic {
            s.validate().map_err(config_err)?;
        }
        if let Some(s) = &self.synthetic_detections {
            s.validate().map_err(config_err)?;
        }
        Ok(())
    }

    /// The bundled synthetic setup: planted-group embeddings plus synthetic boxes.
    pub fn synthetic_example() -> Self {
        Self {
            seed: 7,
            synthetic: Some(SyntheticSpec::default()),
            synthetic_detections: Some(SyntheticDetectionSpec::default()),
            ..Self::default()
        }
    }
}

/// Outputs of a full run.
#[derive(Debug, Clone)]
pub struct PipelineSummary {
    pub out: PathBuf,
    pub artifacts: Vec<String>,
    pub notes: Vec<String>,
    pub hierarchy: Hierarchy,
    pub classification: ClassificationMetrics,
    pub recognition: Option<RecognitionReport>,
    pub sweep: Option<SweepTable>,
}

struct Run<'a> {
    out: &'a Path,
    artifacts: Vec<String>,
    stages: Vec<StageRecord>,
}

impl Run<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(name.to_string());
        self.out.join(name)
    }

    fn done(&mut self, name: &str, note: Option<String>) {
        self.stages.push(StageRecord {
            name: name.to_string(),
            status: "ok".into(),
            note,
        });
    }
}

fn stage<T>(name: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| e.in_stage(name))
}

fn load_or_synthesize(config: &PipelineConfig) -> Result<LabeledDataset> {
    match (&config.data.embeddings, &config.synthetic) {
        (Some(path), _) => load_embeddings(path),
        (None, Some(spec)) => Ok(synthesize_dataset(&SyntheticSpec {
            seed: config.seed,
            ..spec.clone()
        })?
        .dataset),
        (None, None) => Err(Error::Config("no embeddings source".into())),
    }
}

fn detection_inputs(config: &PipelineConfig) -> Result<Option<(Vec<Detection>, Vec<GroundTruthBox>)>> {
    match (&config.data.detections, &config.data.ground_truth, &config.synthetic_detections) {
        (Some(d), Some(g), _) => Ok(Some((load_detections(d)?, load_ground_truth(g)?))),
        (None, None, Some(spec)) => Ok(Some(synthesize_detections(&SyntheticDetectionSpec {
            seed: config.seed,
            ..spec.clone()
        })?)),
        _ => Ok(None),
    }
}

/// Model whose heads follow `config.model` over `hierarchy`.
pub fn initial_model(config: &PipelineConfig, dim: usize, hierarchy: &Hierarchy) -> Result<MultiTaskModel> {
    let spec = ModelSpec::for_hierarchy(
        dim,
        hierarchy,
        config.model.lambdas.len(),
        config.model.hidden,
        config.model.lambdas.clone(),
    )?;
    MultiTaskModel::new(&spec, config.seed)
}

/// Split, similarity and hierarchy, shared by [`run_full_pipeline`] and
/// [`compare_flat_vs_hierarchical`].
pub fn prepare(config: &PipelineConfig) -> Result<(Split, SimilarityMatrix, Hierarchy)> {
    config.validate()?;
    let ds = stage("load", || load_or_synthesize(config))?;
    let split = stage("split", || split_dataset(&ds, &config.split_spec()))?;
    let sim = stage("similarity", || similarity_matrix(&split.train, config.similarity))?;
    let hier = stage("hierarchy", || build_hierarchy(&sim, config.hierarchy.levels, &config.hierarchy.ap))?;
    Ok((split, sim, hier))
}

pub fn run_full_pipeline(config: &PipelineConfig) -> Result<PipelineSummary> {
    config.validate()?;
    let out = config.out.as_path();
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut run = Run {
        out,
        artifacts: Vec::new(),
        stages: Vec::new(),
    };
    let mut notes = Vec::new();

    let ds = stage("load", || load_or_synthesize(config))?;
    if config.data.embeddings.is_none() {
        stage("load", || write_embeddings(run.path("embeddings.jsonl"), &ds))?;
    }
    run.done("load", Some(format!("{} records, {} categories, dim {}", ds.len(), ds.n_categories(), ds.dim())));

    let split = stage("split", || split_dataset(&ds, &config.split_spec()))?;
    stage("split", || {
        write_embeddings(run.path("train.jsonl"), &split.train)?;
        write_embeddings(run.path("val.jsonl"), &split.val)?;
        write_embeddings(run.path("test.jsonl"), &split.test)
    })?;
    run.done(
        "split",
        Some(format!("{}/{}/{}", split.train.len(), split.val.len(), split.test.len())),
    );

    let sim = stage("similarity", || similarity_matrix(&split.train, config.similarity))?;
    stage("similarity", || {
        sim.save(run.path("sim.json"))?;
        sim.write_csv(run.path("sim.csv"))
    })?;
    run.done("similarity", None);

    let hierarchy = stage("hierarchy", || {
        build_hierarchy(&sim, config.hierarchy.levels, &config.hierarchy.ap)
    })?;
    stage("hierarchy", || hierarchy.save(run.path("hier.json")))?;
    run.done("hierarchy", Some(format!("level sizes {:?}", hierarchy.level_sizes())));

    let trained = stage("train", || {
        let model = initial_model(config, split.train.dim(), &hierarchy)?;
        train(&model, &split.train, &split.val, &hierarchy, &config.train_config())
    })?;
    stage("train", || {
        trained.model.save(run.path("model.json"))?;
        write_log_csv(run.path("train_log.csv"), &trained.log)
    })?;
    run.done("train", Some(format!("best epoch {}", trained.best_epoch)));

    let eval_set = if split.test.is_empty() { &split.train } else { &split.test };
    if split.test.is_empty() {
        notes.push("test split is empty; classification evaluated on train".to_string());
    }
    let classification = stage("eval-classify", || evaluate_classification(&trained.model, eval_set, &hierarchy))?;
    stage("eval-classify", || jsonl::write_json(&run.path("classification.json"), &classification))?;
    run.done("eval-classify", None);

    let mut recognition = None;
    let mut sweep = None;
    match stage("detections", || detection_inputs(config))? {
        None => {
            notes.push("detection stage skipped: no detections configured".to_string());
            run.stages.push(StageRecord {
                name: "detection".into(),
                status: "skipped".into(),
                note: Some("no detections configured".into()),
            });
        }
        Some((dets, gts)) => {
            if config.data.detections.is_none() {
                stage("detections", || {
                    write_detections(run.path("detections.jsonl"), &dets)?;
                    write_ground_truth(run.path("ground_truth.jsonl"), &gts)
                })?;
            }
            let kept = stage("nms", || nms_per_image(&dets, config.eval.nms_threshold))?;
            stage("nms", || write_detections(run.path("detections_nms.jsonl"), &kept))?;
            run.done("nms", Some(format!("{} -> {} detections", dets.len(), kept.len())));

            let table = stage("sweep", || {
                sweep_thresholds(&kept, &gts, config.eval.sweep_points, config.eval.iou_min)
            })?;
            stage("sweep", || table.write_csv(run.path("sweep.csv")))?;
            run.done("sweep", Some(format!("best threshold {}", table.best_threshold)));

            let report = stage("eval-recognition", || {
                evaluate_recognition(
                    &kept,
                    &gts,
                    table.best_threshold,
                    config.eval.iou_min,
                    config.eval.interpolation,
                )
            })?;
            stage("eval-recognition", || jsonl::write_json(&run.path("metrics.json"), &report))?;
            run.done("eval-recognition", None);
            recognition = Some(report);
            sweep = Some(table);
        }
    }

    let manifest_path = out.join("manifest.json");
    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        config: config.clone(),
        stages: run.stages,
        artifacts: run.artifacts.clone(),
    };
    stage("manifest", || jsonl::write_json(&manifest_path, &manifest))?;
    let mut artifacts = run.artifacts;
    artifacts.push("manifest.json".to_string());

    Ok(PipelineSummary {
        out: out.to_path_buf(),
        artifacts,
        notes,
        hierarchy,
        classification,
        recognition,
        sweep,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub variant: String,
    pub top1: f64,
    pub cluster_top1: f64,
    pub correct: u64,
    pub cluster_correct: u64,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("variant,top1,cluster_top1\n");
        for r in &self.rows {
            out.push_str(&format!("{},{:.6},{:.6}\n", r.variant, r.top1, r.cluster_top1));
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| variant | top1 | cluster_top1 |\n|---|---|---|\n");
        for r in &self.rows {
            out.push_str(&format!("| {} | {:.4} | {:.4} |\n", r.variant, r.top1, r.cluster_top1));
        }
        out
    }
}

/// Trains a flat category head (`FC`), the hierarchical heads (`HC`) and the
/// hierarchical heads plus the fine-tuning phase (`HC-FT`) on one split with
/// one seed, and scores all three on the test split. The flat model's
/// cluster top-1 uses the same hierarchy.
pub fn compare_flat_vs_hierarchical(config: &PipelineConfig) -> Result<ComparisonReport> {
    let (split, _, hierarchy) = prepare(config)?;
    let eval_set = if split.test.is_empty() { &split.train } else { &split.test };
    let dim = split.train.dim();
    let base = config.train_config();

    let flat_config = PipelineConfig {
        model: ModelConfig {
            hidden: config.model.hidden,
            lambdas: vec![1.0],
        },
        ..config.clone()
    };
    let variants: [(&str, &PipelineConfig, TrainConfig); 3] = [
        ("FC", &flat_config, TrainConfig { fine_tune_epochs: 0, ..base.clone() }),
        ("HC", config, TrainConfig { fine_tune_epochs: 0, ..base.clone() }),
        ("HC-FT", config, TrainConfig { fine_tune_epochs: base.fine_tune_epochs.max(1), ..base.clone() }),
    ];
    let mut rows = Vec::with_capacity(3);
    for (name, variant_config, train_config) in variants {
        let metrics = stage("compare", || {
            let model = initial_model(variant_config, dim, &hierarchy)?;
            let trained = train(&model, &split.train, &split.val, &hierarchy, &train_config)?;
            evaluate_classification(&trained.model, eval_set, &hierarchy)
        })?;
        rows.push(ComparisonRow {
            variant: name.to_string(),
            top1: metrics.top1,
            cluster_top1: metrics.cluster_top1,
            correct: metrics.correct,
            cluster_correct: metrics.cluster_correct,
            total: metrics.total,
        });
    }
    Ok(ComparisonReport { rows })
}

/// Runs [`compare_flat_vs_hierarchical`] and writes `compare.csv` and
/// `compare.json` into `config.out`.
pub fn write_comparison(config: &PipelineConfig) -> Result<ComparisonReport> {
    let report = compare_flat_vs_hierarchical(config)?;
    let out = config.out.as_path();
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let csv = out.join("compare.csv");
    std::fs::write(&csv, report.to_csv()).map_err(|e| Error::io(&csv, e))?;
    jsonl::write_json(&out.join("compare.json"), &report)?;
    Ok(report)
}
