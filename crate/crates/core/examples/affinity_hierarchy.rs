//! Cluster categories into a two-level hierarchy and compare with the
//! planted groups.
//!
//! $ cargo run --example affinity_hierarchy

use visual_hierarchy::hierarchy::{adjusted_rand_index, build_hierarchy, ApParams};
use visual_hierarchy::similarity::{similarity_matrix, SimilarityOptions};
use visual_hierarchy::synth::{synthesize_dataset, SyntheticSpec};

fn main() -> visual_hierarchy::Result<()> {
    let data = synthesize_dataset(&SyntheticSpec { seed: 3, ..SyntheticSpec::default() })?;
    let sim = similarity_matrix(&data.dataset, SimilarityOptions::default())?;
    let h = build_hierarchy(&sim, 2, &ApParams::default())?;

    println!("level sizes {:?}, iterations {:?}", h.level_sizes(), h.params().iterations);
    for node in h.clusters(2)? {
        println!("cluster {} (exemplar {}): {}", node.id, node.exemplar, node.members.join(" "));
    }
    let found: Vec<usize> = (0..h.categories().len()).map(|c| h.label_at(c, 2)).collect::<Result<_, _>>()?;
    println!("ARI vs planted groups: {:.4}", adjusted_rand_index(&found, &data.groups));
    Ok(())
}
