//! Visual-aware category hierarchies for image recognition.
//!
//! The crate works on precomputed image embeddings and scored boxes:
//!
//! * [`similarity`] fits per-dimension Gaussians to each category's embeddings
//!   and compares categories by the overlap of those densities.
//! * [`hierarchy`] clusters categories with affinity propagation into a
//!   multi-level tree.
//! * [`multitask`] trains classification heads for every tree level with a
//!   weighted sum of per-level cross-entropies and reports top-1 and
//!   cluster top-1 accuracy.
//! * [`detection`] evaluates localization and recognition: IoU, NMS, score
//!   thresholds, matching, precision/recall/F-measure, accuracy and mAP.
//! * [`pipeline`] chains the stages and writes every artifact to disk.

pub mod cli;
pub mod dataset;
pub mod detection;
pub mod detections;
pub mod error;
pub mod hierarchy;
mod jsonl;
pub mod multitask;
pub mod pipeline;
pub mod rng;
pub mod similarity;
pub mod synth;

pub use error::{Error, Result};
