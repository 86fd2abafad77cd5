//! Labeled embedding datasets: JSONL loading, validation and stratified splits.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{jsonl, rng};

/// One labeled embedding vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub id: String,
    pub label: String,
    pub features: Vec<f64>,
}

/// An ordered collection of [`FeatureRecord`]s sharing one dimension, with a
/// dense lexicographic category index.
///
/// A dataset produced by [`split_dataset`] keeps its parent's category list,
/// so indices stay comparable across train/val/test even when a part lacks
/// some category.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    records: Vec<FeatureRecord>,
    dim: usize,
    categories: Vec<String>,
    index: HashMap<String, usize>,
    labels: Vec<usize>,
}

impl LabeledDataset {
    /// Validates `records` and builds the category index from their labels.
    pub fn new(records: Vec<FeatureRecord>) -> Result<Self> {
        let first = records.first().ok_or(Error::Empty("dataset"))?;
        let dim = first.features.len();
        let mut categories: Vec<String> = records.iter().map(|r| r.label.clone()).collect();
        categories.sort();
        categories.dedup();
        Self::with_categories(records, dim, categories)
    }

    /// Builds a dataset over an explicit category list, which must be sorted,
    /// free of duplicates and cover every record label. `records` may be empty.
    pub fn with_categories(
        records: Vec<FeatureRecord>,
        dim: usize,
        categories: Vec<String>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("feature dimension must be at least 1"));
        }
        if categories.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("categories must be strictly sorted"));
        }
        let index: HashMap<String, usize> = categories
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();
        let mut seen = HashSet::with_capacity(records.len());
        let mut labels = Vec::with_capacity(records.len());
        for (i, record) in records.iter().enumerate() {
            if record.features.len() != dim {
                return Err(Error::InconsistentDimension {
                    line: i + 1,
                    expected: dim,
                    found: record.features.len(),
                });
            }
            if let Some(bad) = record.features.iter().find(|v| !v.is_finite()) {
                return Err(Error::param(format!(
                    "record `{}` has non-finite feature {bad}",
                    record.id
                )));
            }
            if !seen.insert(record.id.as_str()) {
                return Err(Error::DuplicateId(record.id.clone()));
            }
            let label = *index
                .get(&record.label)
                .ok_or_else(|| Error::UnknownCategory(record.label.clone()))?;
            labels.push(label);
        }
        Ok(Self {
            records,
            dim,
            categories,
            index,
            labels,
        })
    }

    pub fn records(&self) -> &[FeatureRecord] {
        &self.records
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn n_categories(&self) -> usize {
        self.categories.len()
    }

    pub fn category_index(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    /// Dense category index of every record, in record order.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// `(features, category index)` pairs in record order.
    pub fn samples(&self) -> impl Iterator<Item = (&[f64], usize)> + '_ {
        self.records
            .iter()
            .zip(&self.labels)
            .map(|(r, &l)| (r.features.as_slice(), l))
    }

    /// Record positions grouped by category index, each group in record order.
    pub fn by_category(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.categories.len()];
        for (i, &l) in self.labels.iter().enumerate() {
            groups[l].push(i);
        }
        groups
    }

    fn subset(&self, positions: &[usize]) -> Self {
        let records = positions.iter().map(|&i| self.records[i].clone()).collect();
        Self {
            records,
            dim: self.dim,
            categories: self.categories.clone(),
            index: self.index.clone(),
            labels: positions.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Loads an embeddings JSONL file: one `{"id", "label", "features"}` object per line.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let rows: Vec<(usize, FeatureRecord)> = jsonl::read(path)?;
    let Some((_, first)) = rows.first() else {
        return Err(Error::EmptyFile(path.to_path_buf()));
    };
    let dim = first.features.len();
    if dim == 0 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: rows[0].0,
            message: "empty feature vector".into(),
        });
    }
    for (line, record) in &rows {
        if record.features.len() != dim {
            return Err(Error::InconsistentDimension {
                line: *line,
                expected: dim,
                found: record.features.len(),
            });
        }
    }
    LabeledDataset::new(rows.into_iter().map(|(_, r)| r).collect())
}

pub fn write_embeddings(path: impl AsRef<Path>, ds: &LabeledDataset) -> Result<()> {
    jsonl::write(path.as_ref(), ds.records())
}

/// Train/validation/test ratios and the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub ratios: [f64; 3],
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            ratios: [0.7, 0.1, 0.2],
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if self.ratios.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::param(format!(
                "split ratios must be non-negative, got {:?}",
                self.ratios
            )));
        }
        let sum: f64 = self.ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::param(format!(
                "split ratios must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: LabeledDataset,
    pub val: LabeledDataset,
    pub test: LabeledDataset,
}

/// Absorbs representation error such as `0.7 * 10 = 6.999...`.
const COUNT_EPS: f64 = 1e-9;

fn part_size(ratio: f64, n: usize) -> usize {
    ((ratio * n as f64 + COUNT_EPS).floor() as usize).min(n)
}

/// Stratified split: within every category the records are shuffled and the
/// first `floor(r_train * n)` go to train, the next `floor(r_val * n)` to
/// validation, the remainder to test. Categories with fewer than three records
/// go entirely to train. Each part lists records in their original order.
pub fn split_dataset(ds: &LabeledDataset, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    if ds.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let mut rng = rng::seeded(spec.seed);
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for (cat, mut members) in ds.by_category().into_iter().enumerate() {
        let n = members.len();
        if n == 0 {
            continue;
        }
        if n < 3 {
            log::warn!(
                "category `{}` has {n} record(s); assigning all to train",
                ds.categories()[cat]
            );
            train.extend(members);
            continue;
        }
        rng::shuffle(&mut members, &mut rng);
        let n_train = part_size(spec.ratios[0], n);
        let n_val = part_size(spec.ratios[1], n).min(n - n_train);
        train.extend_from_slice(&members[..n_train]);
        val.extend_from_slice(&members[n_train..n_train + n_val]);
        test.extend_from_slice(&members[n_train + n_val..]);
    }
    for part in [&mut train, &mut val, &mut test] {
        part.sort_unstable();
    }
    Ok(Split {
        train: ds.subset(&train),
        val: ds.subset(&val),
        test: ds.subset(&test),
    })
}
