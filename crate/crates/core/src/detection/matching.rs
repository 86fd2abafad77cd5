use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::nms::rank_by_score;
use crate::detections::{group_by_image, Detection, GroundTruthBox};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        Self { tp, fp, fn_ }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutcome {
    pub counts: ConfusionCounts,
    /// `(detection index, ground-truth index)` for every true positive, in
    /// processing order.
    pub pairs: Vec<(usize, usize)>,
    /// Matched ground truth of each detection, indexed like the input.
    pub matched: Vec<Option<usize>>,
}

/// Greedy one-to-one matching in the given detection order. Each detection
/// takes the unconsumed ground truth in its image (of the same label when
/// `label_aware`) with the highest IoU, if that IoU is strictly above
/// `iou_min`.
pub(crate) fn greedy_match(
    dets: &[Detection],
    gts: &[GroundTruthBox],
    order: &[usize],
    iou_min: f64,
    label_aware: bool,
) -> Vec<Option<usize>> {
    let by_image: HashMap<&str, Vec<usize>> = group_by_image(gts).into_iter().collect();
    let mut consumed = vec![false; gts.len()];
    let mut matched = vec![None; dets.len()];
    for &d in order {
        let det = &dets[d];
        let Some(candidates) = by_image.get(det.image_id.as_str()) else {
            continue;
        };
        let mut best: Option<(usize, f64)> = None;
        for &g in candidates {
            if consumed[g] {
                continue;
            }
            if label_aware && det.label.as_deref() != Some(gts[g].label.as_str()) {
                continue;
            }
            let overlap = det.bbox.iou(&gts[g].bbox);
            if overlap > iou_min && best.is_none_or(|(_, b)| overlap > b) {
                best = Some((g, overlap));
            }
        }
        if let Some((g, _)) = best {
            consumed[g] = true;
            matched[d] = Some(g);
        }
    }
    matched
}

/// Counts true positives, false positives and missed ground truths.
///
/// Within each image detections are processed by descending score.
pub fn match_detections(
    dets: &[Detection],
    gts: &[GroundTruthBox],
    iou_min: f64,
    label_aware: bool,
) -> MatchOutcome {
    let order = rank_by_score(dets);
    let matched = greedy_match(dets, gts, &order, iou_min, label_aware);
    let pairs: Vec<(usize, usize)> = order
        .iter()
        .filter_map(|&d| matched[d].map(|g| (d, g)))
        .collect();
    let tp = pairs.len() as u64;
    MatchOutcome {
        counts: ConfusionCounts {
            tp,
            fp: dets.len() as u64 - tp,
            fn_: gts.len() as u64 - tp,
        },
        pairs,
        matched,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::BoundingBox;

    fn bx(x1: f64, x2: f64) -> BoundingBox {
        BoundingBox::new(x1, 0.0, x2, 10.0).unwrap()
    }

    fn det(x1: f64, x2: f64, score: f64, label: &str) -> Detection {
        Detection::new("img", bx(x1, x2), score).unwrap().with_label(label)
    }

    fn gt(x1: f64, x2: f64, label: &str) -> GroundTruthBox {
        GroundTruthBox::new("img", bx(x1, x2), label)
    }

    #[test]
    fn exact_hit() {
        let m = match_detections(&[det(0.0, 10.0, 0.9, "rice")], &[gt(0.0, 10.0, "rice")], 0.5, true);
        assert_eq!(m.counts, ConfusionCounts::new(1, 0, 0));
        assert_eq!(m.pairs, [(0, 0)]);
    }

    #[test]
    fn weak_overlap_is_a_miss() {
        // IoU of [0,4] and [0,10] is 0.4
        let m = match_detections(&[det(0.0, 4.0, 0.9, "rice")], &[gt(0.0, 10.0, "rice")], 0.5, false);
        assert_eq!(m.counts, ConfusionCounts::new(0, 1, 1));
    }

    #[test]
    fn duplicate_detection_is_a_false_positive() {
        let dets = [det(0.0, 9.0, 0.8, "rice"), det(0.0, 10.0, 0.9, "rice")];
        let m = match_detections(&dets, &[gt(0.0, 10.0, "rice")], 0.5, false);
        assert_eq!(m.counts, ConfusionCounts::new(1, 1, 0));
        // the higher-scoring detection claims the box
        assert_eq!(m.pairs, [(1, 0)]);

        // exhaustive check over every one-to-one assignment: at most one
        // detection can own the single ground truth
        let best_possible = (0..=dets.len())
            .filter(|&owner| owner == dets.len() || dets[owner].bbox.iou(&gt(0.0, 10.0, "").bbox) > 0.5)
            .map(|owner| u64::from(owner < dets.len()))
            .max()
            .unwrap();
        assert_eq!(m.counts.tp, best_possible);
    }

    #[test]
    fn label_awareness() {
        let dets = [det(0.0, 10.0, 0.9, "soup")];
        let gts = [gt(0.0, 10.0, "rice")];
        assert_eq!(match_detections(&dets, &gts, 0.5, true).counts, ConfusionCounts::new(0, 1, 1));
        assert_eq!(match_detections(&dets, &gts, 0.5, false).counts, ConfusionCounts::new(1, 0, 0));
        let unlabeled = [Detection::new("img", bx(0.0, 10.0), 0.9).unwrap()];
        assert_eq!(match_detections(&unlabeled, &gts, 0.5, true).counts.tp, 0);
    }

    #[test]
    fn images_do_not_cross_match() {
        let dets = [Detection::new("other", bx(0.0, 10.0), 0.9).unwrap()];
        let m = match_detections(&dets, &[gt(0.0, 10.0, "rice")], 0.5, false);
        assert_eq!(m.counts, ConfusionCounts::new(0, 1, 1));
    }

    #[test]
    fn iou_threshold_is_strict() {
        // IoU exactly 0.5
        let m = match_detections(&[det(0.0, 5.0, 0.9, "x")], &[gt(0.0, 10.0, "x")], 0.5, false);
        assert_eq!(m.counts.tp, 0);
    }
}
