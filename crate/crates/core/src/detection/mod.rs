//! Localization and recognition evaluation.
//!
//! Boxes use continuous corner coordinates. IoU comparisons are strict
//! (`>`), score thresholds inclusive (`>=`), and matching is greedy by
//! descending score with each ground-truth box consumed at most once.

mod ap;
mod bbox;
mod matching;
mod metrics;
mod nms;
mod report;
mod sweep;

pub use ap::{average_precision, mean_average_precision, Interpolation, MapReport};
pub use bbox::{iou, BoundingBox};
pub use matching::{match_detections, ConfusionCounts, MatchOutcome};
pub use metrics::{f_measure, prf, recognition_accuracy, Prf, RecognitionAccuracy};
pub use nms::{apply_score_threshold, nms, nms_per_image};
pub use report::{evaluate_recognition, RecognitionReport};
pub use sweep::{sweep_grid, sweep_thresholds, SweepRow, SweepTable};
