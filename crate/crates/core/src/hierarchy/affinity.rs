//! Affinity propagation over a similarity matrix.
//!
//! Responsibilities and availabilities start at zero and are updated
//! alternately with damping. A point is an exemplar while its
//! self-responsibility plus self-availability is positive; the run stops once
//! the exemplar set has stayed the same for `stable_iters` consecutive
//! iterations.

use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::similarity::SimilarityMatrix;

/// Self-similarity policy; controls how many exemplars emerge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PreferenceRepr", into = "PreferenceRepr")]
pub enum Preference {
    /// Median of the off-diagonal similarities.
    Median,
    Value(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PreferenceRepr {
    Value(f64),
    Name(String),
}

impl TryFrom<PreferenceRepr> for Preference {
    type Error = String;

    fn try_from(repr: PreferenceRepr) -> Result<Self, String> {
        match repr {
            PreferenceRepr::Value(v) if v.is_finite() => Ok(Preference::Value(v)),
            PreferenceRepr::Value(v) => Err(format!("preference must be finite, got {v}")),
            PreferenceRepr::Name(name) if name == "median" => Ok(Preference::Median),
            PreferenceRepr::Name(name) => Err(format!(
                "unknown preference `{name}` (expected \"median\" or a number)"
            )),
        }
    }
}

impl From<Preference> for PreferenceRepr {
    fn from(p: Preference) -> Self {
        match p {
            Preference::Median => PreferenceRepr::Name("median".into()),
            Preference::Value(v) => PreferenceRepr::Value(v),
        }
    }
}

impl std::str::FromStr for Preference {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "median" {
            return Ok(Preference::Median);
        }
        s.parse::<f64>()
            .map_err(|e| format!("invalid preference `{s}`: {e}"))
            .and_then(|v| Preference::try_from(PreferenceRepr::Value(v)))
    }
}

impl Preference {
    pub fn resolve(&self, s: &Array2<f64>) -> f64 {
        match *self {
            Preference::Value(v) => v,
            Preference::Median => median_off_diagonal(s),
        }
    }
}

fn median_off_diagonal(s: &Array2<f64>) -> f64 {
    let n = s.nrows();
    let mut off: Vec<f64> = s
        .indexed_iter()
        .filter(|((i, j), _)| i != j)
        .map(|(_, &v)| v)
        .collect();
    if off.is_empty() {
        return s.get((0, 0)).copied().unwrap_or(0.0);
    }
    off.sort_by(f64::total_cmp);
    let m = off.len();
    debug_assert_eq!(m, n * (n - 1));
    if m % 2 == 1 {
        off[m / 2]
    } else {
        0.5 * (off[m / 2 - 1] + off[m / 2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ApParams {
    pub preference: Preference,
    pub damping: f64,
    pub max_iter: usize,
    pub stable_iters: usize,
}

impl Default for ApParams {
    fn default() -> Self {
        Self {
            preference: Preference::Median,
            damping: 0.5,
            max_iter: 500,
            stable_iters: 15,
        }
    }
}

impl ApParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::param(format!(
                "damping must lie in [0, 1), got {}",
                self.damping
            )));
        }
        if self.max_iter == 0 || self.stable_iters == 0 {
            return Err(Error::param("max_iter and stable_iters must be at least 1"));
        }
        Ok(())
    }
}

/// Seed of the fixed tie-breaking perturbation.
const JITTER_SEED: u64 = 0;

/// Message-passing state: similarities (diagonal set to the preference),
/// responsibilities and availabilities.
#[derive(Debug, Clone)]
pub struct ClusteringState {
    s: Array2<f64>,
    r: Array2<f64>,
    a: Array2<f64>,
    iteration: usize,
}

impl ClusteringState {
    /// Copies `similarity`, writes `preference` on its diagonal and adds a
    /// fixed, seeded perturbation of relative size ~1e-12. Exactly tied
    /// candidates would otherwise receive identical messages forever and
    /// could never be told apart.
    pub fn new(similarity: &Array2<f64>, preference: f64) -> Self {
        let n = similarity.nrows();
        let mut s = similarity.clone();
        for k in 0..n {
            s[[k, k]] = preference;
        }
        let mut rng = rng::seeded(JITTER_SEED);
        for v in s.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += (1e-12 * v.abs() + 1e-14) * z;
        }
        Self {
            s,
            r: Array2::zeros((n, n)),
            a: Array2::zeros((n, n)),
            iteration: 0,
        }
    }

    pub fn similarities(&self) -> &Array2<f64> {
        &self.s
    }

    pub fn responsibilities(&self) -> &Array2<f64> {
        &self.r
    }

    pub fn availabilities(&self) -> &Array2<f64> {
        &self.a
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// One damped responsibility update followed by one damped availability
    /// update. Requires at least two points.
    pub fn step(&mut self, damping: f64) {
        let n = self.s.nrows();
        let keep = damping;
        let take = 1.0 - damping;

        for i in 0..n {
            // best and second-best of a(i, k') + s(i, k')
            let (mut best, mut best_k, mut second) = (f64::NEG_INFINITY, 0, f64::NEG_INFINITY);
            for k in 0..n {
                let v = self.a[[i, k]] + self.s[[i, k]];
                if v > best {
                    second = best;
                    best = v;
                    best_k = k;
                } else if v > second {
                    second = v;
                }
            }
            for k in 0..n {
                let competitor = if k == best_k { second } else { best };
                let fresh = self.s[[i, k]] - competitor;
                self.r[[i, k]] = keep * self.r[[i, k]] + take * fresh;
            }
        }

        for k in 0..n {
            let support: f64 = (0..n)
                .filter(|&i| i != k)
                .map(|i| self.r[[i, k]].max(0.0))
                .sum();
            let rkk = self.r[[k, k]];
            for i in 0..n {
                let fresh = if i == k {
                    support
                } else {
                    (rkk + support - self.r[[i, k]].max(0.0)).min(0.0)
                };
                self.a[[i, k]] = keep * self.a[[i, k]] + take * fresh;
            }
        }
        self.iteration += 1;
    }

    /// Indices `k` with `r(k,k) + a(k,k) > 0`, ascending.
    pub fn exemplars(&self) -> Vec<usize> {
        (0..self.s.nrows())
            .filter(|&k| self.r[[k, k]] + self.a[[k, k]] > 0.0)
            .collect()
    }

    fn strongest_candidate(&self) -> usize {
        let mut best = 0;
        for k in 1..self.s.nrows() {
            if self.r[[k, k]] + self.a[[k, k]] > self.r[[best, best]] + self.a[[best, best]] {
                best = k;
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    /// Exemplar indices, ascending.
    pub exemplars: Vec<usize>,
    /// Exemplar index chosen by every point.
    pub assignment: Vec<usize>,
    pub n_iterations: usize,
    pub converged: bool,
    /// Preference value actually placed on the diagonal.
    pub preference: f64,
}

impl ClusteringResult {
    pub fn n_clusters(&self) -> usize {
        self.exemplars.len()
    }

    /// Dense cluster id (position of its exemplar in `exemplars`) per point.
    pub fn cluster_ids(&self) -> Vec<usize> {
        self.assignment
            .iter()
            .map(|e| self.exemplars.binary_search(e).expect("assigned to an exemplar"))
            .collect()
    }

    /// Members of each cluster in exemplar order, each list ascending.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.exemplars.len()];
        for (i, c) in self.cluster_ids().into_iter().enumerate() {
            out[c].push(i);
        }
        out
    }
}

pub fn affinity_propagation(s: &SimilarityMatrix, params: &ApParams) -> Result<ClusteringResult> {
    affinity_propagation_values(s.values(), params)
}

/// Affinity propagation on a raw square matrix, which must be symmetric and
/// finite but may hold any real values.
pub fn affinity_propagation_values(s: &Array2<f64>, params: &ApParams) -> Result<ClusteringResult> {
    params.validate()?;
    let n = s.nrows();
    if n == 0 {
        return Err(Error::Empty("similarity matrix"));
    }
    if s.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: s.ncols(),
        });
    }
    for ((i, j), &v) in s.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::param(format!("similarity ({i}, {j}) is not finite")));
        }
        if v != s[[j, i]] {
            return Err(Error::NotSymmetric { row: i, col: j });
        }
    }
    let preference = params.preference.resolve(s);
    if !preference.is_finite() {
        return Err(Error::param("preference must be finite"));
    }
    if n == 1 {
        return Ok(ClusteringResult {
            exemplars: vec![0],
            assignment: vec![0],
            n_iterations: 0,
            converged: true,
            preference,
        });
    }

    let mut state = ClusteringState::new(s, preference);
    let mut current = Vec::new();
    let mut unchanged = 0;
    let mut converged = false;
    for _ in 0..params.max_iter {
        state.step(params.damping);
        let exemplars = state.exemplars();
        if exemplars == current {
            unchanged += 1;
        } else {
            unchanged = 0;
            current = exemplars;
        }
        if unchanged >= params.stable_iters && !current.is_empty() {
            converged = true;
            break;
        }
    }

    if current.is_empty() {
        log::warn!(
            "affinity propagation found no exemplar after {} iterations; collapsing to one cluster",
            state.iteration()
        );
        let only = state.strongest_candidate();
        return Ok(ClusteringResult {
            exemplars: vec![only],
            assignment: vec![only; n],
            n_iterations: state.iteration(),
            converged: false,
            preference,
        });
    }

    let assignment = (0..n)
        .map(|i| {
            if current.binary_search(&i).is_ok() {
                return i;
            }
            let mut best = current[0];
            for &k in &current[1..] {
                if s[[i, k]] > s[[i, best]] {
                    best = k;
                }
            }
            best
        })
        .collect();
    Ok(ClusteringResult {
        exemplars: current,
        assignment,
        n_iterations: state.iteration(),
        converged,
        preference,
    })
}
