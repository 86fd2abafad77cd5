use serde::{Deserialize, Serialize};

use super::loss::{argmax, predict};
use super::model::MultiTaskModel;
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryAccuracy {
    pub label: String,
    pub total: u64,
    pub correct: u64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub total: u64,
    pub correct: u64,
    pub cluster_correct: u64,
    pub top1: f64,
    pub cluster_top1: f64,
    pub per_category: Vec<CategoryAccuracy>,
    /// `confusion[true][predicted]` counts over categories.
    pub confusion: Vec<Vec<u64>>,
}

pub(crate) fn check_categories(ds: &LabeledDataset, hierarchy: &Hierarchy) -> Result<()> {
    if let Some(unknown) = ds.categories().iter().find(|c| hierarchy.category_index(c).is_none()) {
        return Err(Error::UnknownCategory(unknown.clone()));
    }
    if ds.categories() != hierarchy.categories() {
        return Err(Error::param(
            "dataset and hierarchy disagree on the category list",
        ));
    }
    Ok(())
}

/// Top-1 and cluster top-1 accuracy of the category head.
///
/// A prediction is cluster-correct when the predicted category sits in the
/// same level-2 cluster as the true category, so it is always at least as
/// lenient as top-1.
pub fn evaluate_classification(
    model: &MultiTaskModel,
    test: &LabeledDataset,
    hierarchy: &Hierarchy,
) -> Result<ClassificationMetrics> {
    if test.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    check_categories(test, hierarchy)?;
    let n = hierarchy.categories().len();
    if model.level_sizes()[0] != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: model.level_sizes()[0],
        });
    }
    let mut confusion = vec![vec![0u64; n]; n];
    let (mut correct, mut cluster_correct) = (0u64, 0u64);
    for (x, y) in test.samples() {
        let dist = predict(model, x)?;
        let pred = argmax(&dist.levels[0]);
        confusion[y][pred] += 1;
        if pred == y {
            correct += 1;
        }
        if hierarchy.label_at(pred, 2)? == hierarchy.label_at(y, 2)? {
            cluster_correct += 1;
        }
    }
    let total = test.len() as u64;
    let per_category = hierarchy
        .categories()
        .iter()
        .enumerate()
        .map(|(c, label)| {
            let row_total: u64 = confusion[c].iter().sum();
            CategoryAccuracy {
                label: label.clone(),
                total: row_total,
                correct: confusion[c][c],
                accuracy: if row_total == 0 {
                    0.0
                } else {
                    confusion[c][c] as f64 / row_total as f64
                },
            }
        })
        .collect();
    Ok(ClassificationMetrics {
        total,
        correct,
        cluster_correct,
        top1: correct as f64 / total as f64,
        cluster_top1: cluster_correct as f64 / total as f64,
        per_category,
        confusion,
    })
}
