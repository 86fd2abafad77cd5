use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::eval::{check_categories, evaluate_classification};
use super::loss::{batch_loss_with, label_table, loss_and_gradient_with};
use super::model::MultiTaskModel;
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;
use crate::rng;

/// Mini-batch SGD settings. A second phase at `fine_tune_rate` runs for
/// `fine_tune_epochs` epochs, starting from the best first-phase parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub fine_tune_rate: f64,
    pub fine_tune_epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 20,
            learning_rate: 0.05,
            fine_tune_rate: 0.005,
            fine_tune_epochs: 10,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::param("batch_size must be at least 1"));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.learning_rate) || !positive(self.fine_tune_rate) {
            return Err(Error::param("learning rates must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Train,
    FineTune,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Train => "train",
            Phase::FineTune => "fine_tune",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub phase: Phase,
    /// Mean per-example loss over the epoch's batches.
    pub train_loss: f64,
    pub val_top1: Option<f64>,
    pub val_cluster_top1: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters with the best validation top-1 (ties: lower validation
    /// loss, then earlier epoch). Epoch 0 is the initial model.
    pub model: MultiTaskModel,
    pub best_epoch: usize,
    pub log: Vec<EpochLog>,
}

struct Score {
    top1: f64,
    loss: f64,
}

impl Score {
    fn beats(&self, other: &Score) -> bool {
        self.top1 > other.top1 || (self.top1 == other.top1 && self.loss < other.loss)
    }
}

/// Trains `model` with mini-batch SGD on the mean batch gradient.
///
/// Batches are drawn in record order, reshuffled every epoch when
/// `config.shuffle` is set. When `val` is empty the last epoch wins.
pub fn train(
    model: &MultiTaskModel,
    train: &LabeledDataset,
    val: &LabeledDataset,
    hierarchy: &Hierarchy,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if train.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: train.dim(),
        });
    }
    check_categories(train, hierarchy)?;
    if !val.is_empty() {
        check_categories(val, hierarchy)?;
    }
    let table = label_table(model, hierarchy)?;
    let samples: Vec<(&[f64], usize)> = train.samples().collect();
    let val_samples: Vec<(&[f64], usize)> = val.samples().collect();

    let score = |m: &MultiTaskModel| -> Result<Option<(Score, f64)>> {
        if val.is_empty() {
            return Ok(None);
        }
        let metrics = evaluate_classification(m, val, hierarchy)?;
        let loss = batch_loss_with(m, &val_samples, &table) / val_samples.len() as f64;
        Ok(Some((
            Score {
                top1: metrics.top1,
                loss,
            },
            metrics.cluster_top1,
        )))
    };

    let mut current = model.clone();
    let mut best = current.clone();
    let mut best_epoch = 0;
    let mut best_score = score(&current)?.map(|(s, _)| s);
    let mut log = Vec::new();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = rng::seeded(config.seed);
    let mut batch = Vec::with_capacity(config.batch_size);

    let phases = [
        (Phase::Train, config.epochs, config.learning_rate),
        (Phase::FineTune, config.fine_tune_epochs, config.fine_tune_rate),
    ];
    let mut epoch = 0;
    for (phase, epochs, rate) in phases {
        if phase == Phase::FineTune {
            current = best.clone();
        }
        for _ in 0..epochs {
            epoch += 1;
            if config.shuffle {
                rng::shuffle(&mut order, &mut rng);
            }
            let mut total = 0.0;
            for chunk in order.chunks(config.batch_size) {
                batch.clear();
                batch.extend(chunk.iter().map(|&i| samples[i]));
                let (loss, grad) = loss_and_gradient_with(&current, &batch, &table);
                if !loss.is_finite() {
                    return Err(Error::Diverged {
                        phase: phase.as_str(),
                        epoch,
                        loss,
                    });
                }
                total += loss;
                current.descend(&grad.0, rate / batch.len() as f64);
            }
            if current.to_flat().iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged {
                    phase: phase.as_str(),
                    epoch,
                    loss: f64::NAN,
                });
            }
            let evaluated = score(&current)?;
            log.push(EpochLog {
                epoch,
                phase,
                train_loss: total / samples.len() as f64,
                val_top1: evaluated.as_ref().map(|(s, _)| s.top1),
                val_cluster_top1: evaluated.as_ref().map(|(_, c)| *c),
            });
            let improved = match (&evaluated, &best_score) {
                (Some((s, _)), Some(b)) => s.beats(b),
                _ => true,
            };
            if improved {
                best = current.clone();
                best_epoch = epoch;
                best_score = evaluated.map(|(s, _)| s);
            }
        }
    }
    Ok(TrainOutcome {
        model: best,
        best_epoch,
        log,
    })
}

/// CSV `epoch,phase,train_loss,val_top1,val_cluster_top1`; missing
/// validation values are left empty.
pub fn write_log_csv(path: impl AsRef<Path>, log: &[EpochLog]) -> Result<()> {
    let path = path.as_ref();
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    let mut out = String::from("epoch,phase,train_loss,val_top1,val_cluster_top1\n");
    for row in log {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.epoch,
            row.phase,
            row.train_loss,
            opt(row.val_top1),
            opt(row.val_cluster_top1)
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
