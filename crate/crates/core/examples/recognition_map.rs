//! Label-aware recognition metrics and per-class AP.
//!
//! $ cargo run --example recognition_map

use visual_hierarchy::detection::{evaluate_recognition, f_measure, nms_per_image, Interpolation};
use visual_hierarchy::synth::{synthesize_detections, SyntheticDetectionSpec};

fn main() -> visual_hierarchy::Result<()> {
    let (dets, gts) = synthesize_detections(&SyntheticDetectionSpec { seed: 5, ..Default::default() })?;
    let kept = nms_per_image(&dets, 0.7)?;
    for interp in [Interpolation::AllPoint, Interpolation::ElevenPoint] {
        let r = evaluate_recognition(&kept, &gts, 0.5, 0.5, interp)?;
        println!("{interp:?}: P {:.4} R {:.4} F {:.4} acc {:.4} mAP {:.4}", r.precision, r.recall, r.f_measure, r.accuracy, r.map);
        for (class, ap) in &r.per_class_ap {
            println!("  {class:<6} AP {ap:.4}");
        }
    }

    // F-measure is the harmonic mean of precision and recall.
    println!("\nF(0.8159, 0.8604) = {:.4}", f_measure(0.8159, 0.8604));
    Ok(())
}
