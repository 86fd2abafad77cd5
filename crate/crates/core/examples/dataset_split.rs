//! Write a synthetic embeddings file, load it back and split it per category.
//!
//! $ cargo run --example dataset_split

use visual_hierarchy::dataset::{load_embeddings, split_dataset, write_embeddings, SplitSpec};
use visual_hierarchy::synth::{synthesize_dataset, SyntheticSpec};

fn main() -> visual_hierarchy::Result<()> {
    let spec = SyntheticSpec {
        n_categories: 6,
        n_groups: 2,
        dim: 8,
        samples_per_category: 30,
        ..SyntheticSpec::default()
    };
    let data = synthesize_dataset(&spec)?;

    let path = std::env::temp_dir().join("vishier_dataset_split.jsonl");
    write_embeddings(&path, &data.dataset)?;
    let ds = load_embeddings(&path)?;
    println!("{}: {} records, dim {}", path.display(), ds.len(), ds.dim());

    let split = split_dataset(&ds, &SplitSpec { ratios: [0.7, 0.1, 0.2], seed: 1 })?;
    println!("{:<8} {:>6} {:>6} {:>6}", "category", "train", "val", "test");
    let counts = |d: &visual_hierarchy::dataset::LabeledDataset| -> Vec<usize> {
        d.by_category().iter().map(Vec::len).collect()
    };
    let (tr, va, te) = (counts(&split.train), counts(&split.val), counts(&split.test));
    for (c, label) in ds.categories().iter().enumerate() {
        println!("{label:<8} {:>6} {:>6} {:>6}", tr[c], va[c], te[c]);
    }
    Ok(())
}
