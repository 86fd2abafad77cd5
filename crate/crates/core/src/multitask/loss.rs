use ndarray::{Array1, ArrayView1, Axis};

use super::model::{Dense, MultiTaskModel};
use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;

/// Probability floor inside the logarithm.
pub const PROB_EPS: f64 = 1e-12;

/// Max-shifted softmax; finite for any finite logits.
pub fn softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut out = logits.mapv(|v| (v - max).exp());
    let total = out.sum();
    out /= total;
    out
}

/// `-ln(max(p[y], 1e-12))` for a one-hot target `y`.
pub fn cross_entropy(p: &[f64], y: usize) -> Result<f64> {
    let py = *p.get(y).ok_or(Error::LevelOutOfRange {
        level: y,
        levels: p.len(),
    })?;
    Ok(-py.max(PROB_EPS).ln())
}

/// First index of the largest value.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Per-level class probabilities for one input, level 1 first.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionDistribution {
    pub levels: Vec<Vec<f64>>,
}

impl PredictionDistribution {
    /// Most probable class at `level` (1-based); ties go to the lowest index.
    pub fn argmax(&self, level: usize) -> usize {
        argmax(&self.levels[level - 1])
    }
}

/// Activations kept from a forward pass for back-propagation.
struct Forward {
    hidden_pre: Option<Array1<f64>>,
    features: Array1<f64>,
    probs: Vec<Array1<f64>>,
}

fn forward(model: &MultiTaskModel, x: &[f64]) -> Forward {
    let input = ArrayView1::from(x);
    let (hidden_pre, features) = match model.shared() {
        Some(shared) => {
            let pre = shared.forward(input);
            let act = pre.mapv(|v| v.max(0.0));
            (Some(pre), act)
        }
        None => (None, input.to_owned()),
    };
    let probs = model
        .heads()
        .iter()
        .map(|h| softmax(h.forward(features.view()).view()))
        .collect();
    Forward {
        hidden_pre,
        features,
        probs,
    }
}

pub fn predict(model: &MultiTaskModel, features: &[f64]) -> Result<PredictionDistribution> {
    model.check_input(features)?;
    Ok(PredictionDistribution {
        levels: forward(model, features)
            .probs
            .into_iter()
            .map(|p| p.to_vec())
            .collect(),
    })
}

/// Label of every category at levels `1..=heads`, checked against the
/// model's head widths.
pub(crate) fn label_table(model: &MultiTaskModel, hierarchy: &Hierarchy) -> Result<Vec<Vec<usize>>> {
    let heads = model.n_heads();
    if heads > hierarchy.n_levels() {
        return Err(Error::LevelOutOfRange {
            level: heads,
            levels: hierarchy.n_levels(),
        });
    }
    for (t, &width) in model.level_sizes().iter().enumerate() {
        let expected = hierarchy.level_size(t + 1)?;
        if width != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: width,
            });
        }
    }
    Ok((0..hierarchy.categories().len())
        .map(|c| hierarchy.path(c)[..heads].to_vec())
        .collect())
}

fn check_batch(model: &MultiTaskModel, batch: &[(&[f64], usize)], n_categories: usize) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    for &(x, y) in batch {
        model.check_input(x)?;
        if y >= n_categories {
            return Err(Error::UnknownCategory(format!("#{y}")));
        }
    }
    Ok(())
}

fn example_loss(model: &MultiTaskModel, fwd: &Forward, labels: &[usize]) -> f64 {
    model
        .lambdas()
        .iter()
        .zip(&fwd.probs)
        .zip(labels)
        .map(|((&lambda, p), &y)| lambda * -p[y].max(PROB_EPS).ln())
        .sum()
}

/// `Σ_t λ_t Σ_i -ln p_i^(t)[y_i^(t)]` over the batch, where `y_i^(t)` is the
/// level-t ancestor of example `i`'s category.
pub fn multitask_loss(model: &MultiTaskModel, batch: &[(&[f64], usize)], hierarchy: &Hierarchy) -> Result<f64> {
    let table = label_table(model, hierarchy)?;
    check_batch(model, batch, table.len())?;
    Ok(batch
        .iter()
        .map(|&(x, y)| example_loss(model, &forward(model, x), &table[y]))
        .sum())
}

/// Gradient of [`multitask_loss`], laid out like the model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient(pub(crate) MultiTaskModel);

impl Gradient {
    pub fn shared(&self) -> Option<&Dense> {
        self.0.shared()
    }

    pub fn heads(&self) -> &[Dense] {
        self.0.heads()
    }

    /// Same ordering as [`MultiTaskModel::to_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        self.0.to_flat()
    }
}

pub(crate) fn loss_and_gradient_with(
    model: &MultiTaskModel,
    batch: &[(&[f64], usize)],
    table: &[Vec<usize>],
) -> (f64, Gradient) {
    let mut grad = model.zeros_like();
    let mut loss = 0.0;
    for &(x, y) in batch {
        let fwd = forward(model, x);
        let labels = &table[y];
        loss += example_loss(model, &fwd, labels);

        let mut d_features = Array1::<f64>::zeros(fwd.features.len());
        for (t, (head, p)) in model.heads().iter().zip(&fwd.probs).enumerate() {
            let lambda = model.lambdas()[t];
            let target = labels[t];
            // the clamp makes the loss flat in the logits once p[y] < eps
            if lambda == 0.0 || p[target] < PROB_EPS {
                continue;
            }
            let mut d_logits = p * lambda;
            d_logits[target] -= lambda;
            let g = &mut grad.heads[t];
            let outer = d_logits
                .view()
                .insert_axis(Axis(1))
                .dot(&fwd.features.view().insert_axis(Axis(0)));
            g.weight += &outer;
            g.bias += &d_logits;
            d_features += &head.weight.t().dot(&d_logits);
        }

        if let (Some(g), Some(pre)) = (grad.shared.as_mut(), fwd.hidden_pre.as_ref()) {
            let d_pre: Array1<f64> = d_features
                .iter()
                .zip(pre)
                .map(|(&d, &z)| if z > 0.0 { d } else { 0.0 })
                .collect();
            let outer = d_pre
                .view()
                .insert_axis(Axis(1))
                .dot(&ArrayView1::from(x).insert_axis(Axis(0)));
            g.weight += &outer;
            g.bias += &d_pre;
        }
    }
    (loss, Gradient(grad))
}

/// Exact analytic gradient of [`multitask_loss`] with respect to every
/// parameter, by back-propagating the softmax/cross-entropy composite
/// `λ_t (p - onehot(y))` through each head and the shared layer.
pub fn loss_gradient(model: &MultiTaskModel, batch: &[(&[f64], usize)], hierarchy: &Hierarchy) -> Result<Gradient> {
    let table = label_table(model, hierarchy)?;
    check_batch(model, batch, table.len())?;
    Ok(loss_and_gradient_with(model, batch, &table).1)
}

pub(crate) fn batch_loss_with(model: &MultiTaskModel, batch: &[(&[f64], usize)], table: &[Vec<usize>]) -> f64 {
    batch
        .iter()
        .map(|&(x, y)| example_loss(model, &forward(model, x), &table[y]))
        .sum()
}
