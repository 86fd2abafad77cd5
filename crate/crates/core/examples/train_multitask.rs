//! Train two-level heads on a split and report top-1 and cluster top-1.
//!
//! $ cargo run --release --example train_multitask

use visual_hierarchy::dataset::{split_dataset, SplitSpec};
use visual_hierarchy::hierarchy::{build_hierarchy, ApParams};
use visual_hierarchy::multitask::{evaluate_classification, train, ModelSpec, MultiTaskModel, TrainConfig};
use visual_hierarchy::similarity::{similarity_matrix, SimilarityOptions};
use visual_hierarchy::synth::{synthesize_dataset, SyntheticSpec};

fn main() -> visual_hierarchy::Result<()> {
    let data = synthesize_dataset(&SyntheticSpec::default())?;
    let split = split_dataset(&data.dataset, &SplitSpec::default())?;
    let sim = similarity_matrix(&split.train, SimilarityOptions::default())?;
    let h = build_hierarchy(&sim, 2, &ApParams::default())?;

    let spec = ModelSpec::for_hierarchy(split.train.dim(), &h, 2, None, vec![0.5, 0.5])?;
    let model = MultiTaskModel::new(&spec, 0)?;
    let outcome = train(&model, &split.train, &split.val, &h, &TrainConfig::default())?;
    for row in outcome.log.iter().step_by(5) {
        println!(
            "epoch {:>3} {:<9} loss {:.4} val top1 {:.3}",
            row.epoch,
            row.phase.as_str(),
            row.train_loss,
            row.val_top1.unwrap_or(f64::NAN)
        );
    }
    let m = evaluate_classification(&outcome.model, &split.test, &h)?;
    println!("best epoch {}: test top1 {:.4}, cluster top1 {:.4}", outcome.best_epoch, m.top1, m.cluster_top1);
    Ok(())
}
