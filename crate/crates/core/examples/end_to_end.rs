//! Every stage on the bundled synthetic config; artifacts go to a temp dir.
//!
//! $ cargo run --release --example end_to_end

use visual_hierarchy::pipeline::{run_full_pipeline, PipelineConfig};

fn main() -> visual_hierarchy::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/synthetic.toml");
    let mut config = PipelineConfig::load(path)?;
    config.out = std::env::temp_dir().join("vishier_end_to_end");

    let summary = run_full_pipeline(&config)?;
    println!("artifacts in {}:", summary.out.display());
    for a in &summary.artifacts {
        println!("  {a}");
    }
    println!("hierarchy level sizes {:?}", summary.hierarchy.level_sizes());
    println!("top1 {:.4}, cluster top1 {:.4}", summary.classification.top1, summary.classification.cluster_top1);
    if let Some(r) = summary.recognition {
        println!("recognition F {:.4}, mAP {:.4} at threshold {}", r.f_measure, r.map, r.threshold);
    }
    Ok(())
}
