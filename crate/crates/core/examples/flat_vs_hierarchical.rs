//! Flat head vs hierarchical heads vs hierarchical heads plus fine-tuning.
//!
//! $ cargo run --release --example flat_vs_hierarchical

use visual_hierarchy::pipeline::{compare_flat_vs_hierarchical, PipelineConfig};

fn main() -> visual_hierarchy::Result<()> {
    let config = PipelineConfig::synthetic_example();
    let report = compare_flat_vs_hierarchical(&config)?;
    print!("{}", report.to_markdown());
    Ok(())
}
