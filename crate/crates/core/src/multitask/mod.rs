//! Multi-task classification heads over frozen embeddings.
//!
//! A [`MultiTaskModel`] has one softmax head per hierarchy level (level 1 =
//! categories, level 2 = clusters, ...), optionally on top of a shared ReLU
//! layer. Training minimises `Σ_t λ_t · CE_t` summed over the batch.

mod eval;
mod loss;
mod model;
mod train;

pub use eval::{evaluate_classification, CategoryAccuracy, ClassificationMetrics};
pub use loss::{
    argmax, cross_entropy, loss_gradient, multitask_loss, predict, softmax, Gradient,
    PredictionDistribution, PROB_EPS,
};
pub use model::{Dense, ModelSpec, MultiTaskModel};
pub use train::{train, write_log_csv, EpochLog, Phase, TrainConfig, TrainOutcome};

/// Default level weights for a two-level hierarchy.
pub const DEFAULT_LAMBDAS: [f64; 2] = [0.5, 0.5];
