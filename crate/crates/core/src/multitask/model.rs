use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;
use crate::{jsonl, rng};

/// Affine map `y = W x + b` with `W` stored as `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
        }
    }

    /// Weights uniform in `[-0.01, 0.01)`, zero bias.
    fn init(inputs: usize, outputs: usize, rng: &mut rng::Rng) -> Self {
        let weight = Array2::from_shape_simple_fn((outputs, inputs), || rng::uniform(rng, -0.01, 0.01));
        Self {
            weight,
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.nrows()
    }

    pub fn forward(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.weight.dot(&x) + &self.bias
    }

    fn n_params(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.weight.iter().chain(self.bias.iter())
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weight.iter_mut().chain(self.bias.iter_mut())
    }
}

/// Shape of a [`MultiTaskModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub dim: usize,
    /// Width of the optional shared ReLU layer; `None` puts heads directly on
    /// the embedding.
    pub hidden: Option<usize>,
    /// Output width of each head, level 1 (categories) first.
    pub levels: Vec<usize>,
    pub lambdas: Vec<f64>,
}

impl ModelSpec {
    /// One head per hierarchy level, or only the first `heads` levels.
    pub fn for_hierarchy(
        dim: usize,
        hierarchy: &Hierarchy,
        heads: usize,
        hidden: Option<usize>,
        lambdas: Vec<f64>,
    ) -> Result<Self> {
        if heads == 0 || heads > hierarchy.n_levels() {
            return Err(Error::LevelOutOfRange {
                level: heads,
                levels: hierarchy.n_levels(),
            });
        }
        let spec = Self {
            dim,
            hidden,
            levels: hierarchy.level_sizes()[..heads].to_vec(),
            lambdas,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.hidden == Some(0) {
            return Err(Error::param("model dimensions must be positive"));
        }
        if self.levels.is_empty() || self.levels.contains(&0) {
            return Err(Error::param("every head needs at least one output"));
        }
        if self.lambdas.len() != self.levels.len() {
            return Err(Error::param(format!(
                "{} lambdas for {} heads",
                self.lambdas.len(),
                self.levels.len()
            )));
        }
        if self.lambdas.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::param("lambdas must be non-negative"));
        }
        if self.lambdas.iter().sum::<f64>() <= 0.0 {
            return Err(Error::param("lambdas must not all be zero"));
        }
        Ok(())
    }
}

/// Optional shared layer plus one softmax head per hierarchy level.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiTaskModel {
    dim: usize,
    pub(crate) shared: Option<Dense>,
    pub(crate) heads: Vec<Dense>,
    lambdas: Vec<f64>,
}

impl MultiTaskModel {
    pub fn new(spec: &ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = rng::seeded(seed);
        let shared = spec.hidden.map(|h| Dense::init(spec.dim, h, &mut rng));
        let width = spec.hidden.unwrap_or(spec.dim);
        let heads = spec
            .levels
            .iter()
            .map(|&n| Dense::init(width, n, &mut rng))
            .collect();
        Ok(Self {
            dim: spec.dim,
            shared,
            heads,
            lambdas: spec.lambdas.clone(),
        })
    }

    pub fn zeros(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        let width = spec.hidden.unwrap_or(spec.dim);
        Ok(Self {
            dim: spec.dim,
            shared: spec.hidden.map(|h| Dense::zeros(spec.dim, h)),
            heads: spec.levels.iter().map(|&n| Dense::zeros(width, n)).collect(),
            lambdas: spec.lambdas.clone(),
        })
    }

    pub fn spec(&self) -> ModelSpec {
        ModelSpec {
            dim: self.dim,
            hidden: self.shared.as_ref().map(Dense::outputs),
            levels: self.level_sizes(),
            lambdas: self.lambdas.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_heads(&self) -> usize {
        self.heads.len()
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        self.heads.iter().map(Dense::outputs).collect()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn shared(&self) -> Option<&Dense> {
        self.shared.as_ref()
    }

    pub fn heads(&self) -> &[Dense] {
        &self.heads
    }

    pub fn heads_mut(&mut self) -> &mut [Dense] {
        &mut self.heads
    }

    pub fn shared_mut(&mut self) -> Option<&mut Dense> {
        self.shared.as_mut()
    }

    pub fn set_lambdas(&mut self, lambdas: Vec<f64>) -> Result<()> {
        let spec = ModelSpec {
            lambdas,
            ..self.spec()
        };
        spec.validate()?;
        self.lambdas = spec.lambdas;
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.layers().map(Dense::n_params).sum()
    }

    fn layers(&self) -> impl Iterator<Item = &Dense> {
        self.shared.iter().chain(self.heads.iter())
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Dense> {
        self.shared.iter_mut().chain(self.heads.iter_mut())
    }

    /// Parameters flattened: shared weight, shared bias, then each head's
    /// weight and bias; weights row-major.
    pub fn to_flat(&self) -> Vec<f64> {
        self.layers().flat_map(Dense::values).copied().collect()
    }

    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                found: values.len(),
            });
        }
        for (dst, &src) in self.layers_mut().flat_map(Dense::values_mut).zip(values) {
            *dst = src;
        }
        Ok(())
    }

    /// `self -= step * grad`
    pub(crate) fn descend(&mut self, grad: &MultiTaskModel, step: f64) {
        let grads = grad.layers().flat_map(Dense::values);
        for (p, g) in self.layers_mut().flat_map(Dense::values_mut).zip(grads) {
            *p -= step * g;
        }
    }

    pub(crate) fn zeros_like(&self) -> Self {
        Self {
            dim: self.dim,
            shared: self.shared.as_ref().map(|d| Dense::zeros(d.inputs(), d.outputs())),
            heads: self.heads.iter().map(|d| Dense::zeros(d.inputs(), d.outputs())).collect(),
            lambdas: self.lambdas.clone(),
        }
    }

    pub(crate) fn check_input(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: features.len(),
            });
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut params = BTreeMap::new();
        if let Some(shared) = &self.shared {
            params.insert("shared.weight".to_string(), shared.weight.iter().copied().collect());
            params.insert("shared.bias".to_string(), shared.bias.to_vec());
        }
        for (t, head) in self.heads.iter().enumerate() {
            params.insert(format!("level{}.weight", t + 1), head.weight.iter().copied().collect());
            params.insert(format!("level{}.bias", t + 1), head.bias.to_vec());
        }
        let file = ModelFile {
            dim: self.dim,
            hidden: self.shared.as_ref().map(Dense::outputs),
            levels: self.level_sizes(),
            lambdas: self.lambdas.clone(),
            params,
        };
        jsonl::write_json(path.as_ref(), &file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut file: ModelFile = jsonl::read_json(path.as_ref())?;
        let spec = ModelSpec {
            dim: file.dim,
            hidden: file.hidden,
            levels: file.levels.clone(),
            lambdas: file.lambdas.clone(),
        };
        let mut model = Self::zeros(&spec)?;
        let mut take = |name: String, dst: &mut Dense| -> Result<()> {
            let weight = file
                .params
                .remove(&format!("{name}.weight"))
                .ok_or_else(|| Error::param(format!("model file lacks `{name}.weight`")))?;
            let bias = file
                .params
                .remove(&format!("{name}.bias"))
                .ok_or_else(|| Error::param(format!("model file lacks `{name}.bias`")))?;
            if weight.len() != dst.weight.len() || bias.len() != dst.bias.len() {
                return Err(Error::param(format!("`{name}` has the wrong shape")));
            }
            dst.weight
                .iter_mut()
                .zip(weight)
                .for_each(|(d, s)| *d = s);
            dst.bias = Array1::from(bias);
            Ok(())
        };
        if let Some(shared) = model.shared.as_mut() {
            take("shared".into(), shared)?;
        }
        for (t, head) in model.heads.iter_mut().enumerate() {
            take(format!("level{}", t + 1), head)?;
        }
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    dim: usize,
    hidden: Option<usize>,
    levels: Vec<usize>,
    lambdas: Vec<f64>,
    params: BTreeMap<String, Vec<f64>>,
}
