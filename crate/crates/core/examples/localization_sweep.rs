//! NMS on synthetic boxes followed by a score-threshold sweep.
//!
//! $ cargo run --example localization_sweep

use visual_hierarchy::detection::{nms_per_image, sweep_thresholds};
use visual_hierarchy::synth::{synthesize_detections, SyntheticDetectionSpec};

fn main() -> visual_hierarchy::Result<()> {
    let (dets, gts) = synthesize_detections(&SyntheticDetectionSpec::default())?;
    let kept = nms_per_image(&dets, 0.7)?;
    println!("{} detections, {} after NMS, {} ground truths\n", dets.len(), kept.len(), gts.len());

    let table = sweep_thresholds(&kept, &gts, 21, 0.5)?;
    print!("{}", table.to_csv());
    let best = table.best();
    println!("\nbest threshold {} (F = {:.4})", best.threshold, best.f_measure);
    Ok(())
}
