use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ap::{mean_average_precision, Interpolation};
use super::matching::{match_detections, ConfusionCounts};
use super::metrics::{prf, recognition_accuracy};
use super::nms::apply_score_threshold;
use crate::detections::{Detection, GroundTruthBox};
use crate::error::Result;

/// Recognition metrics at one score threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognitionReport {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub accuracy: f64,
    pub map: f64,
    pub per_class_ap: BTreeMap<String, f64>,
    pub excluded_classes: Vec<String>,
    pub threshold: f64,
    pub iou_min: f64,
    pub counts: ConfusionCounts,
    pub accuracy_defined: bool,
}

/// Keeps detections scoring at least `threshold`, then scores them against
/// the ground truth with label-aware matching. mAP is computed over the same
/// kept detections, i.e. the regions that would reach the classifier.
pub fn evaluate_recognition(
    dets: &[Detection],
    gts: &[GroundTruthBox],
    threshold: f64,
    iou_min: f64,
    interpolation: Interpolation,
) -> Result<RecognitionReport> {
    let kept = apply_score_threshold(dets, threshold);
    let counts = match_detections(&kept, gts, iou_min, true).counts;
    let m = prf(&counts);
    let acc = recognition_accuracy(&counts);
    let map = mean_average_precision(&kept, gts, iou_min, interpolation)?;
    Ok(RecognitionReport {
        precision: m.precision,
        recall: m.recall,
        f_measure: m.f_measure,
        accuracy: acc.value,
        map: map.map,
        per_class_ap: map.per_class_ap,
        excluded_classes: map.excluded_classes,
        threshold,
        iou_min,
        counts,
        accuracy_defined: acc.defined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::BoundingBox;

    #[test]
    fn threshold_drops_low_scores_before_matching() {
        let b = BoundingBox::new(0.0, 0.0, 10.0, 10.0).unwrap();
        let far = BoundingBox::new(50.0, 50.0, 60.0, 60.0).unwrap();
        let dets = vec![
            Detection::new("i", b, 0.9).unwrap().with_label("rice"),
            Detection::new("i", far, 0.2).unwrap().with_label("rice"),
        ];
        let gts = vec![GroundTruthBox::new("i", b, "rice")];
        let low = evaluate_recognition(&dets, &gts, 0.0, 0.5, Interpolation::AllPoint).unwrap();
        assert_eq!(low.counts, ConfusionCounts::new(1, 1, 0));
        assert_eq!(low.accuracy, 0.5);
        let high = evaluate_recognition(&dets, &gts, 0.5, 0.5, Interpolation::AllPoint).unwrap();
        assert_eq!(high.counts, ConfusionCounts::new(1, 0, 0));
        assert_eq!((high.accuracy, high.map), (1.0, 1.0));
    }
}
