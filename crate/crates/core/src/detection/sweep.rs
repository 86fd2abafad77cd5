use std::path::Path;

use serde::{Deserialize, Serialize};

use super::matching::{match_detections, ConfusionCounts};
use super::metrics::prf;
use super::nms::apply_score_threshold;
use crate::detections::{Detection, GroundTruthBox};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub counts: ConfusionCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Threshold with the highest F-measure; ties go to the lowest threshold.
    pub best_threshold: f64,
}

impl SweepTable {
    pub fn best(&self) -> &SweepRow {
        self.rows
            .iter()
            .find(|r| r.threshold == self.best_threshold)
            .expect("best threshold is one of the rows")
    }

    /// `threshold,precision,recall,f_measure` with six decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,precision,recall,f_measure\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{:.6},{:.6},{:.6},{:.6}\n",
                r.threshold, r.precision, r.recall, r.f_measure
            ));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Evenly spaced thresholds `i / (n_points - 1)`.
pub fn sweep_grid(n_points: usize) -> Vec<f64> {
    let last = (n_points - 1) as f64;
    (0..n_points).map(|i| i as f64 / last).collect()
}

/// Precision, recall and F-measure of class-agnostic localization at each of
/// `n_points` evenly spaced score thresholds in `[0, 1]`.
pub fn sweep_thresholds(
    dets: &[Detection],
    gts: &[GroundTruthBox],
    n_points: usize,
    iou_min: f64,
) -> Result<SweepTable> {
    if n_points < 2 {
        return Err(Error::param(format!(
            "a sweep needs at least 2 points, got {n_points}"
        )));
    }
    let rows: Vec<SweepRow> = sweep_grid(n_points)
        .into_iter()
        .map(|threshold| {
            let kept = apply_score_threshold(dets, threshold);
            let counts = match_detections(&kept, gts, iou_min, false).counts;
            let m = prf(&counts);
            SweepRow {
                threshold,
                precision: m.precision,
                recall: m.recall,
                f_measure: m.f_measure,
                counts,
            }
        })
        .collect();
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.f_measure > rows[best].f_measure {
            best = i;
        }
    }
    Ok(SweepTable {
        best_threshold: rows[best].threshold,
        rows,
    })
}
