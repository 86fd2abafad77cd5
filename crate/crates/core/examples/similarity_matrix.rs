//! Overlap of two Gaussians, then the full category similarity matrix.
//!
//! $ cargo run --example similarity_matrix

use visual_hierarchy::similarity::{ovl, similarity_matrix, GaussianFit, SimilarityOptions};
use visual_hierarchy::synth::{synthesize_dataset, SyntheticSpec};

fn main() -> visual_hierarchy::Result<()> {
    for (m, s) in [(0.0, 1.0), (1.0, 1.0), (3.0, 1.0), (0.0, 2.0)] {
        let a = GaussianFit::new(0.0, 1.0)?;
        let b = GaussianFit::new(m, s)?;
        println!("OVL(N(0,1), N({m},{s}^2)) = {:.6}", ovl(&a, &b));
    }

    let data = synthesize_dataset(&SyntheticSpec {
        n_categories: 6,
        n_groups: 2,
        dim: 16,
        samples_per_category: 50,
        ..SyntheticSpec::default()
    })?;
    let sim = similarity_matrix(&data.dataset, SimilarityOptions::default())?;
    println!("\nplanted groups {:?}", data.groups);
    print!("{:>7}", "");
    for l in sim.labels() {
        print!("{l:>7}");
    }
    println!();
    for (i, l) in sim.labels().iter().enumerate() {
        print!("{l:>7}");
        for j in 0..sim.len() {
            print!("{:>7.3}", sim.get(i, j));
        }
        println!();
    }
    Ok(())
}
