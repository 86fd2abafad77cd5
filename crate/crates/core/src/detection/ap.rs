use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::matching::greedy_match;
use super::nms::rank_by_score;
use crate::detections::{Detection, GroundTruthBox};
use crate::error::{Error, Result};

/// How the precision–recall curve is integrated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Area under the monotone precision envelope at every recall step.
    #[default]
    AllPoint,
    /// Mean envelope precision at recall 0, 0.1, ..., 1.
    ElevenPoint,
}

/// Average precision of one class.
///
/// Detections are ranked by descending score across all images and matched
/// greedily; returns `None` when there is no ground truth to recall.
pub fn average_precision(
    dets: &[Detection],
    gts: &[GroundTruthBox],
    iou_min: f64,
    interpolation: Interpolation,
) -> Option<f64> {
    if gts.is_empty() {
        return None;
    }
    let order = rank_by_score(dets);
    let matched = greedy_match(dets, gts, &order, iou_min, false);
    let n_gt = gts.len() as f64;

    let mut recall = Vec::with_capacity(order.len());
    let mut precision = Vec::with_capacity(order.len());
    let mut tp = 0usize;
    for (rank, &d) in order.iter().enumerate() {
        if matched[d].is_some() {
            tp += 1;
        }
        recall.push(tp as f64 / n_gt);
        precision.push(tp as f64 / (rank + 1) as f64);
    }
    // precision envelope: best precision at any equal or higher recall
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }

    let ap = match interpolation {
        Interpolation::AllPoint => {
            let mut area = 0.0;
            let mut prev = 0.0;
            for (r, p) in recall.iter().zip(&precision) {
                area += (r - prev) * p;
                prev = *r;
            }
            area
        }
        Interpolation::ElevenPoint => {
            (0..=10)
                .map(|k| {
                    let level = k as f64 / 10.0;
                    recall
                        .iter()
                        .position(|&r| r >= level)
                        .map_or(0.0, |i| precision[i])
                })
                .sum::<f64>()
                / 11.0
        }
    };
    Some(ap.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapReport {
    pub map: f64,
    pub per_class_ap: BTreeMap<String, f64>,
    /// Detected classes without any ground truth; left out of the mean.
    pub excluded_classes: Vec<String>,
}

/// Unweighted mean of per-class AP over the classes present in the ground
/// truth. Detections without a label are ignored.
pub fn mean_average_precision(
    dets: &[Detection],
    gts: &[GroundTruthBox],
    iou_min: f64,
    interpolation: Interpolation,
) -> Result<MapReport> {
    let classes: BTreeSet<&str> = gts.iter().map(|g| g.label.as_str()).collect();
    if classes.is_empty() {
        return Err(Error::Empty("ground truth"));
    }
    let mut per_class_ap = BTreeMap::new();
    for &class in &classes {
        let class_dets: Vec<Detection> = dets
            .iter()
            .filter(|d| d.label.as_deref() == Some(class))
            .cloned()
            .collect();
        let class_gts: Vec<GroundTruthBox> = gts.iter().filter(|g| g.label == class).cloned().collect();
        let ap = average_precision(&class_dets, &class_gts, iou_min, interpolation)
            .expect("class has ground truth");
        per_class_ap.insert(class.to_string(), ap);
    }
    let excluded_classes: Vec<String> = dets
        .iter()
        .filter_map(|d| d.label.as_deref())
        .filter(|l| !classes.contains(l))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(String::from)
        .collect();
    let map = per_class_ap.values().sum::<f64>() / per_class_ap.len() as f64;
    Ok(MapReport {
        map,
        per_class_ap,
        excluded_classes,
    })
}
