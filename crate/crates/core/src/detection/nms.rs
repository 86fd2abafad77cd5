use crate::detections::{group_by_image, Detection};
use crate::error::{Error, Result};

/// Positions of `dets` by descending score; equal scores keep input order.
pub(crate) fn rank_by_score(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score));
    order
}

fn check_threshold(iou_threshold: f64) -> Result<()> {
    if iou_threshold > 0.0 && iou_threshold <= 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!(
            "IoU threshold must lie in (0, 1], got {iou_threshold}"
        )))
    }
}

/// Greedy non-maximum suppression for one image.
///
/// Walks the detections by descending score, keeping each one unless a
/// previously kept box overlaps it with IoU strictly above `iou_threshold`.
/// The result is sorted by descending score.
pub fn nms(dets: &[Detection], iou_threshold: f64) -> Result<Vec<Detection>> {
    check_threshold(iou_threshold)?;
    if let Some(first) = dets.first() {
        if let Some(other) = dets.iter().find(|d| d.image_id != first.image_id) {
            return Err(Error::MixedImages(first.image_id.clone(), other.image_id.clone()));
        }
    }
    let mut kept: Vec<Detection> = Vec::new();
    for i in rank_by_score(dets) {
        let candidate = &dets[i];
        if kept.iter().all(|k| k.bbox.iou(&candidate.bbox) <= iou_threshold) {
            kept.push(candidate.clone());
        }
    }
    Ok(kept)
}

/// [`nms`] applied image by image; images appear in sorted id order.
pub fn nms_per_image(dets: &[Detection], iou_threshold: f64) -> Result<Vec<Detection>> {
    check_threshold(iou_threshold)?;
    let mut out = Vec::with_capacity(dets.len());
    for positions in group_by_image(dets).into_values() {
        let group: Vec<Detection> = positions.iter().map(|&i| dets[i].clone()).collect();
        out.extend(nms(&group, iou_threshold)?);
    }
    Ok(out)
}

/// Keeps detections with `score >= threshold`.
pub fn apply_score_threshold(dets: &[Detection], threshold: f64) -> Vec<Detection> {
    dets.iter().filter(|d| d.score >= threshold).cloned().collect()
}
