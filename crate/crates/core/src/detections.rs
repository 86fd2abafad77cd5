//! Scored detections and ground-truth boxes, with their JSONL formats.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detection::BoundingBox;
use crate::error::{Error, Result};
use crate::jsonl;

/// A scored region proposal. `score` is the localization confidence
/// ("foodness"); `label` is present once the region has been classified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub image_id: String,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl Detection {
    pub fn new(image_id: impl Into<String>, bbox: BoundingBox, score: f64) -> Result<Self> {
        validate_score(score)?;
        Ok(Self {
            image_id: image_id.into(),
            bbox,
            score,
            label: None,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthBox {
    pub image_id: String,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub label: String,
}

impl GroundTruthBox {
    pub fn new(image_id: impl Into<String>, bbox: BoundingBox, label: impl Into<String>) -> Self {
        Self {
            image_id: image_id.into(),
            bbox,
            label: label.into(),
        }
    }
}

fn validate_score(score: f64) -> Result<()> {
    if (0.0..=1.0).contains(&score) {
        Ok(())
    } else {
        Err(Error::InvalidScore(score))
    }
}

fn relabel(path: &Path, line: usize, err: Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: err.to_string(),
    }
}

pub fn load_detections(path: impl AsRef<Path>) -> Result<Vec<Detection>> {
    let path = path.as_ref();
    let rows: Vec<(usize, Detection)> = jsonl::read(path)?;
    rows.into_iter()
        .map(|(line, d)| {
            validate_score(d.score).map_err(|e| relabel(path, line, e))?;
            Ok(d)
        })
        .collect()
}

pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<Vec<GroundTruthBox>> {
    let rows: Vec<(usize, GroundTruthBox)> = jsonl::read(path.as_ref())?;
    Ok(rows.into_iter().map(|(_, g)| g).collect())
}

pub fn write_detections(path: impl AsRef<Path>, dets: &[Detection]) -> Result<()> {
    jsonl::write(path.as_ref(), dets)
}

pub fn write_ground_truth(path: impl AsRef<Path>, gts: &[GroundTruthBox]) -> Result<()> {
    jsonl::write(path.as_ref(), gts)
}

/// Something that belongs to one image.
pub trait ImageItem {
    fn image_id(&self) -> &str;
}

impl ImageItem for Detection {
    fn image_id(&self) -> &str {
        &self.image_id
    }
}

impl ImageItem for GroundTruthBox {
    fn image_id(&self) -> &str {
        &self.image_id
    }
}

/// Positions of `items` grouped by image id; groups are keyed in sorted
/// order and keep input order internally.
pub fn group_by_image<T: ImageItem>(items: &[T]) -> BTreeMap<&str, Vec<usize>> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, item) in items.iter().enumerate() {
        groups.entry(item.image_id()).or_default().push(i);
    }
    groups
}
