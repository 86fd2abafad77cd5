use serde::{Deserialize, Serialize};

use super::matching::ConfusionCounts;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f_measure(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// `TP/(TP+FP)`, `TP/(TP+FN)` and their harmonic mean; empty denominators give 0.
pub fn prf(counts: &ConfusionCounts) -> Prf {
    let precision = ratio(counts.tp, counts.tp + counts.fp);
    let recall = ratio(counts.tp, counts.tp + counts.fn_);
    Prf {
        precision,
        recall,
        f_measure: f_measure(precision, recall),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecognitionAccuracy {
    pub value: f64,
    /// False when all counts are zero; `value` is then reported as 0.
    pub defined: bool,
}

/// `TP / (TP + FP + FN)`.
pub fn recognition_accuracy(counts: &ConfusionCounts) -> RecognitionAccuracy {
    let den = counts.tp + counts.fp + counts.fn_;
    RecognitionAccuracy {
        value: ratio(counts.tp, den),
        defined: den > 0,
    }
}
