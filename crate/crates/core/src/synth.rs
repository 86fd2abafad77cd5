//! Synthetic embeddings with planted category groups, and synthetic
//! detection/ground-truth sets, for desk-scale experiments.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureRecord, LabeledDataset};
use crate::detection::BoundingBox;
use crate::detections::{Detection, GroundTruthBox};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// Categories are assigned to groups round-robin. Each group gets a centre
/// drawn per dimension from `N(0, between_group_spread²)`, each category a
/// mean drawn from `N(group centre, within_group_spread²)`, and every sample
/// is its category mean plus `N(0, noise_sigma²)` noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n_categories: usize,
    pub n_groups: usize,
    pub dim: usize,
    pub samples_per_category: usize,
    pub within_group_spread: f64,
    pub between_group_spread: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_categories: 20,
            n_groups: 4,
            dim: 32,
            samples_per_category: 100,
            within_group_spread: 0.3,
            between_group_spread: 5.0,
            noise_sigma: 1.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_categories == 0 || self.n_groups == 0 || self.dim == 0 || self.samples_per_category == 0 {
            return Err(Error::param("synthetic counts must all be at least 1"));
        }
        if self.n_groups > self.n_categories {
            return Err(Error::param(format!(
                "n_groups ({}) exceeds n_categories ({})",
                self.n_groups, self.n_categories
            )));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.within_group_spread) || !positive(self.between_group_spread) {
            return Err(Error::param("group spreads must be positive"));
        }
        // zero noise is accepted as the limiting case
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::param("noise_sigma must be non-negative"));
        }
        Ok(())
    }

    pub fn category_label(&self, category: usize) -> String {
        let width = digits(self.n_categories - 1);
        format!("cat_{category:0width$}")
    }
}

fn digits(mut n: usize) -> usize {
    let mut d = 1;
    while n >= 10 {
        n /= 10;
        d += 1;
    }
    d
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub dataset: LabeledDataset,
    /// Planted group of each category, indexed like `dataset.categories()`.
    pub groups: Vec<usize>,
    /// Generating mean of each category.
    pub means: Vec<Vec<f64>>,
}

fn normal(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma).expect("validated sigma")
}

pub fn synthesize_dataset(spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    let mut rng = rng::seeded(spec.seed);
    let between = normal(spec.between_group_spread);
    let within = normal(spec.within_group_spread);

    let centres: Vec<Vec<f64>> = (0..spec.n_groups)
        .map(|_| (0..spec.dim).map(|_| between.sample(&mut rng)).collect())
        .collect();
    let groups: Vec<usize> = (0..spec.n_categories).map(|c| c % spec.n_groups).collect();
    let means: Vec<Vec<f64>> = groups
        .iter()
        .map(|&g| {
            centres[g]
                .iter()
                .map(|&c| c + within.sample(&mut rng))
                .collect()
        })
        .collect();

    let mut records = Vec::with_capacity(spec.n_categories * spec.samples_per_category);
    let sample_width = digits(spec.samples_per_category - 1);
    for (c, mean) in means.iter().enumerate() {
        let label = spec.category_label(c);
        for s in 0..spec.samples_per_category {
            let features = mean
                .iter()
                .map(|&m| {
                    if spec.noise_sigma == 0.0 {
                        m
                    } else {
                        {
                        let z: f64 = rand_distr::StandardNormal.sample(&mut rng);
                        m + spec.noise_sigma * z
                    }
                    }
                })
                .collect();
            records.push(FeatureRecord {
                id: format!("{label}_{s:0sample_width$}"),
                label: label.clone(),
                features,
            });
        }
    }
    Ok(SyntheticDataset {
        dataset: LabeledDataset::new(records)?,
        groups,
        means,
    })
}

/// Synthetic localization output. Every ground-truth object yields one
/// accurate detection scored in `true_score_range` and one near-duplicate
/// scored slightly lower (a target for NMS); each image also gets
/// `false_per_image` background detections scored in `false_score_range`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticDetectionSpec {
    pub n_images: usize,
    pub max_objects_per_image: usize,
    pub false_per_image: usize,
    pub classes: Vec<String>,
    pub true_score_range: [f64; 2],
    pub false_score_range: [f64; 2],
    /// Probability a true detection carries the correct class label.
    pub label_accuracy: f64,
    pub image_size: [f64; 2],
    pub seed: u64,
}

impl Default for SyntheticDetectionSpec {
    fn default() -> Self {
        Self {
            n_images: 40,
            max_objects_per_image: 3,
            false_per_image: 2,
            classes: ["rice", "salad", "soup", "steak"].map(String::from).to_vec(),
            true_score_range: [0.55, 1.0],
            false_score_range: [0.0, 0.45],
            label_accuracy: 0.85,
            image_size: [640.0, 480.0],
            seed: 0,
        }
    }
}

impl SyntheticDetectionSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_images == 0 || self.max_objects_per_image == 0 || self.classes.is_empty() {
            return Err(Error::param(
                "synthetic detections need images, objects and classes",
            ));
        }
        for [lo, hi] in [self.true_score_range, self.false_score_range] {
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
                return Err(Error::param(format!("invalid score range [{lo}, {hi}]")));
            }
        }
        if !(0.0..=1.0).contains(&self.label_accuracy) {
            return Err(Error::param("label_accuracy must lie in [0, 1]"));
        }
        if self.image_size.iter().any(|&s| s.is_nan() || s < 64.0) {
            return Err(Error::param("image_size must be at least 64x64"));
        }
        Ok(())
    }
}

fn random_box(rng: &mut Rng, size: [f64; 2]) -> BoundingBox {
    let w = rng::uniform(rng, 0.1 * size[0], 0.4 * size[0]);
    let h = rng::uniform(rng, 0.1 * size[1], 0.4 * size[1]);
    let x = rng::uniform(rng, 0.0, size[0] - w);
    let y = rng::uniform(rng, 0.0, size[1] - h);
    BoundingBox::new(x, y, x + w, y + h).expect("positive extent")
}

fn jitter(rng: &mut Rng, b: &BoundingBox, frac: f64) -> BoundingBox {
    let dx = frac * b.width();
    let dy = frac * b.height();
    let mut offset = |d: f64| rng::uniform(rng, -d, d);
    let (x1, x2) = (b.x1() + offset(dx), b.x2() + offset(dx));
    let (y1, y2) = (b.y1() + offset(dy), b.y2() + offset(dy));
    BoundingBox::new(x1, y1, x2, y2).unwrap_or(*b)
}

fn score_in(rng: &mut Rng, [lo, hi]: [f64; 2]) -> f64 {
    rng::uniform(rng, lo, hi).clamp(lo, hi)
}

pub fn synthesize_detections(
    spec: &SyntheticDetectionSpec,
) -> Result<(Vec<Detection>, Vec<GroundTruthBox>)> {
    spec.validate()?;
    let mut rng = rng::seeded(spec.seed);
    let mut dets = Vec::new();
    let mut gts = Vec::new();
    let width = digits(spec.n_images - 1);
    for img in 0..spec.n_images {
        let image_id = format!("img_{img:0width$}");
        let n_objects = 1 + rng::below(&mut rng, spec.max_objects_per_image);
        for _ in 0..n_objects {
            let gt_box = random_box(&mut rng, spec.image_size);
            let class = &spec.classes[rng::below(&mut rng, spec.classes.len())];
            let label = if rng::uniform(&mut rng, 0.0, 1.0) < spec.label_accuracy {
                class.clone()
            } else {
                spec.classes[rng::below(&mut rng, spec.classes.len())].clone()
            };
            let score = score_in(&mut rng, spec.true_score_range);
            dets.push(Detection::new(&image_id, jitter(&mut rng, &gt_box, 0.03), score)?.with_label(&label));
            let dup_score = (score - rng::uniform(&mut rng, 0.01, 0.1)).max(0.0);
            dets.push(Detection::new(&image_id, jitter(&mut rng, &gt_box, 0.05), dup_score)?.with_label(label));
            gts.push(GroundTruthBox::new(&image_id, gt_box, class.clone()));
        }
        for _ in 0..spec.false_per_image {
            let b = random_box(&mut rng, spec.image_size);
            let class = &spec.classes[rng::below(&mut rng, spec.classes.len())];
            let score = score_in(&mut rng, spec.false_score_range);
            dets.push(Detection::new(&image_id, b, score)?.with_label(class.clone()));
        }
    }
    Ok((dets, gts))
}
