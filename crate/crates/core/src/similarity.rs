//! Category similarity from per-dimension Gaussian fits.
//!
//! Each category's training embeddings are summarised per dimension by a 1-D
//! Gaussian. Two categories are compared dimension by dimension with the
//! overlap coefficient (the area under the pointwise minimum of the two
//! densities), and the per-dimension overlaps are averaged.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::jsonl;

/// Lower bound on a fitted standard deviation, so constant dimensions still
/// have a proper density.
pub const SIGMA_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub mean: f64,
    pub sigma: f64,
}

impl GaussianFit {
    pub fn new(mean: f64, sigma: f64) -> Result<Self> {
        if !mean.is_finite() || !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::param(format!(
                "invalid Gaussian N({mean}, {sigma}^2)"
            )));
        }
        Ok(Self { mean, sigma })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.sigma;
        (-0.5 * z * z).exp() / (self.sigma * (2.0 * std::f64::consts::PI).sqrt())
    }

    pub fn cdf(&self, x: f64) -> f64 {
        std_normal_cdf((x - self.mean) / self.sigma)
    }
}

pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Mean and population standard deviation (floored at [`SIGMA_FLOOR`]).
pub fn fit_gaussian(samples: &[f64]) -> Result<GaussianFit> {
    if samples.is_empty() {
        return Err(Error::Empty("sample list"));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("samples must be finite"));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(GaussianFit {
        mean,
        sigma: var.sqrt().max(SIGMA_FLOOR),
    })
}

/// Overlap coefficient of two normal densities, in closed form.
///
/// The densities cross where their log-densities agree, a quadratic in `x`
/// with at most two roots. With equal widths there is a single crossing at
/// the midpoint and the overlap is `2 Φ(-|μ₁-μ₂| / 2σ)`. Otherwise the
/// narrower density is the larger one between the roots, so the overlap is
/// the wider density's mass inside `[x₁, x₂]` plus the narrower one's mass
/// outside it.
pub fn ovl(a: &GaussianFit, b: &GaussianFit) -> f64 {
    if a == b {
        return 1.0;
    }
    if a.sigma == b.sigma {
        let z = (a.mean - b.mean).abs() / (2.0 * a.sigma);
        return (2.0 * std_normal_cdf(-z)).clamp(0.0, 1.0);
    }
    let (narrow, wide) = if a.sigma < b.sigma { (a, b) } else { (b, a) };
    let (m1, s1, m2, s2) = (narrow.mean, narrow.sigma, wide.mean, wide.sigma);
    // log N(x; m1, s1) - log N(x; m2, s2) = qa x² + qb x + qc
    let (v1, v2) = (s1 * s1, s2 * s2);
    let qa = 0.5 / v2 - 0.5 / v1;
    let qb = m1 / v1 - m2 / v2;
    let qc = 0.5 * m2 * m2 / v2 - 0.5 * m1 * m1 / v1 + (s2 / s1).ln();
    let disc = qb * qb - 4.0 * qa * qc;
    // strictly positive whenever s1 != s2
    let root = disc.max(0.0).sqrt();
    let sign = if qb < 0.0 { -1.0 } else { 1.0 };
    let q = -0.5 * (qb + sign * root);
    let (r1, r2) = (q / qa, qc / q);
    let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };

    let wide_inside = wide.cdf(hi) - wide.cdf(lo);
    let narrow_outside = std_normal_cdf((lo - m1) / s1) + std_normal_cdf((m1 - hi) / s1);
    (wide_inside + narrow_outside).clamp(0.0, 1.0)
}

/// Per-dimension Gaussian fits for one category.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryProfile {
    pub label: String,
    pub fits: Vec<GaussianFit>,
}

pub fn category_profiles(ds: &LabeledDataset) -> Result<Vec<CategoryProfile>> {
    let groups = ds.by_category();
    let records = ds.records();
    let mut column = Vec::new();
    groups
        .iter()
        .enumerate()
        .map(|(cat, members)| {
            let label = ds.categories()[cat].clone();
            if members.is_empty() {
                return Err(Error::EmptyCategory(label));
            }
            let fits = (0..ds.dim())
                .map(|d| {
                    column.clear();
                    column.extend(members.iter().map(|&i| records[i].features[d]));
                    fit_gaussian(&column)
                })
                .collect::<Result<_>>()?;
            Ok(CategoryProfile { label, fits })
        })
        .collect()
}

/// Symmetric category-by-category similarity with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    labels: Vec<String>,
    values: Array2<f64>,
}

#[derive(Serialize, Deserialize)]
struct SimilarityFile {
    labels: Vec<String>,
    matrix: Vec<Vec<f64>>,
}

impl SimilarityMatrix {
    /// Validates shape, symmetry, range and unit diagonal.
    pub fn new(labels: Vec<String>, values: Array2<f64>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::Empty("similarity matrix"));
        }
        if values.dim() != (n, n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: values.nrows(),
            });
        }
        for i in 0..n {
            for j in 0..n {
                let v = values[[i, j]];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::param(format!(
                        "similarity ({i}, {j}) = {v} outside [0, 1]"
                    )));
                }
                if v != values[[j, i]] {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
            if values[[i, i]] != 1.0 {
                return Err(Error::param(format!("diagonal entry {i} is not 1")));
            }
        }
        Ok(Self { labels, values })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[[i, j]]
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = SimilarityFile {
            labels: self.labels.clone(),
            matrix: self.values.outer_iter().map(|row| row.to_vec()).collect(),
        };
        jsonl::write_json(path.as_ref(), &file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file: SimilarityFile = jsonl::read_json(path.as_ref())?;
        let n = file.labels.len();
        let mut values = Array2::zeros((n, n));
        if file.matrix.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: file.matrix.len(),
            });
        }
        for (i, row) in file.matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                values[[i, j]] = v;
            }
        }
        Self::new(file.labels, values)
    }

    /// Writes the matrix as CSV with a header row of labels, for heatmaps.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("label");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (i, row) in self.values.outer_iter().enumerate() {
            out.push_str(&self.labels[i]);
            for v in row {
                out.push_str(&format!(",{v:.6}"));
            }
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SimilarityOptions {
    /// Min-max rescale the off-diagonal entries onto [0, 1].
    pub rescale: bool,
}

/// `S(i, j)` is the mean over dimensions of the overlap between category
/// `i`'s and category `j`'s fitted Gaussians, summed in dimension order.
pub fn similarity_matrix(train: &LabeledDataset, options: SimilarityOptions) -> Result<SimilarityMatrix> {
    let profiles = category_profiles(train)?;
    Ok(similarity_from_profiles(&profiles, options))
}

pub fn similarity_from_profiles(profiles: &[CategoryProfile], options: SimilarityOptions) -> SimilarityMatrix {
    let n = profiles.len();
    let mut values = Array2::<f64>::eye(n);
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&profiles[i].fits, &profiles[j].fits);
            let total: f64 = a.iter().zip(b).map(|(fa, fb)| ovl(fa, fb)).sum();
            let s = (total / a.len() as f64).clamp(0.0, 1.0);
            values[[i, j]] = s;
            values[[j, i]] = s;
        }
    }
    if options.rescale && n > 2 {
        let off = || (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)));
        let lo = off().map(|(i, j)| values[[i, j]]).fold(f64::INFINITY, f64::min);
        let hi = off().map(|(i, j)| values[[i, j]]).fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            for (i, j) in off() {
                values[[i, j]] = ((values[[i, j]] - lo) / (hi - lo)).clamp(0.0, 1.0);
            }
        }
    }
    SimilarityMatrix {
        labels: profiles.iter().map(|p| p.label.clone()).collect(),
        values,
    }
}
