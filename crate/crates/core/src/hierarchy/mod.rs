//! Multi-level category hierarchies built by repeatedly clustering with
//! affinity propagation.
//!
//! Level 1 holds the categories themselves. Level 2 clusters the categories
//! over their similarity matrix; every further level clusters the nodes of
//! the level below using mean pairwise member similarity.

mod affinity;

use std::collections::HashMap;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;
use crate::similarity::SimilarityMatrix;

pub use affinity::{
    affinity_propagation, affinity_propagation_values, ApParams, ClusteringResult, ClusteringState,
    Preference,
};

/// Similarity between clusters: mean of `S(i, j)` over member pairs, with a
/// unit diagonal. Labels are the exemplars' labels.
pub fn cluster_similarity(s: &SimilarityMatrix, clusters: &ClusteringResult) -> Result<SimilarityMatrix> {
    if clusters.assignment.len() != s.len() {
        return Err(Error::DimensionMismatch {
            expected: s.len(),
            found: clusters.assignment.len(),
        });
    }
    let members = clusters.clusters();
    let m = members.len();
    let mut values = Array2::<f64>::eye(m);
    for u in 0..m {
        for v in u + 1..m {
            let mut total = 0.0;
            for &i in &members[u] {
                for &j in &members[v] {
                    total += s.get(i, j);
                }
            }
            let mean = total / (members[u].len() * members[v].len()) as f64;
            values[[u, v]] = mean;
            values[[v, u]] = mean;
        }
    }
    let labels = clusters
        .exemplars
        .iter()
        .map(|&e| s.labels()[e].clone())
        .collect();
    SimilarityMatrix::new(labels, values)
}

/// One node above the category level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterNode {
    pub level: usize,
    pub id: usize,
    /// Category label of the node's exemplar.
    pub exemplar: String,
    /// Names of the level-below nodes in this cluster: category labels at
    /// level 2, exemplar labels of level-(t−1) clusters above that.
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyParams {
    pub preference: Preference,
    pub damping: f64,
    pub max_iter: usize,
    pub stable_iters: usize,
    /// Iterations run at each clustered level (levels 2..=T).
    pub iterations: Vec<usize>,
    /// True when every level converged.
    pub converged: bool,
    pub level_converged: Vec<bool>,
}

/// Category tree `Y(1) ... Y(T)`, `T >= 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hierarchy {
    categories: Vec<String>,
    category_index: HashMap<String, usize>,
    /// `nodes[t - 2]` are the level-t clusters.
    nodes: Vec<Vec<ClusterNode>>,
    /// `labels[c][t - 1]` is category `c`'s ancestor id at level `t`.
    labels: Vec<Vec<usize>>,
    params: HierarchyParams,
}

#[derive(Serialize, Deserialize)]
struct HierarchyFile {
    levels: usize,
    categories: Vec<String>,
    clusters: Vec<ClusterNode>,
    params: HierarchyParams,
}

impl Hierarchy {
    /// Assembles a hierarchy from per-level nodes, checking that each level
    /// partitions the one below.
    pub fn from_nodes(
        categories: Vec<String>,
        nodes: Vec<Vec<ClusterNode>>,
        params: HierarchyParams,
    ) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::param("a hierarchy needs at least two levels"));
        }
        let category_index: HashMap<String, usize> = categories
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();
        if category_index.len() != categories.len() {
            return Err(Error::param("duplicate category labels"));
        }
        let mut labels: Vec<Vec<usize>> = (0..categories.len()).map(|c| vec![c]).collect();
        // names of the level below, mapped to their id at that level
        let mut below: HashMap<String, usize> = category_index.clone();
        for (offset, level) in nodes.iter().enumerate() {
            let t = offset + 2;
            let mut parent = vec![usize::MAX; below.len()];
            for (id, node) in level.iter().enumerate() {
                if node.id != id || node.level != t {
                    return Err(Error::param(format!(
                        "level {t} node ids must be dense and ordered"
                    )));
                }
                if !category_index.contains_key(&node.exemplar) {
                    return Err(Error::UnknownCategory(node.exemplar.clone()));
                }
                for member in &node.members {
                    let child = *below
                        .get(member)
                        .ok_or_else(|| Error::param(format!("level {t}: unknown member `{member}`")))?;
                    if parent[child] != usize::MAX {
                        return Err(Error::param(format!(
                            "level {t}: `{member}` belongs to two clusters"
                        )));
                    }
                    parent[child] = id;
                }
            }
            if parent.contains(&usize::MAX) {
                return Err(Error::param(format!(
                    "level {t} does not cover every level-{} node",
                    t - 1
                )));
            }
            for row in &mut labels {
                let child = row[t - 2];
                row.push(parent[child]);
            }
            below = level
                .iter()
                .map(|n| (n.exemplar.clone(), n.id))
                .collect();
            if below.len() != level.len() {
                return Err(Error::param(format!("level {t}: duplicate exemplars")));
            }
        }
        Ok(Self {
            categories,
            category_index,
            nodes,
            labels,
            params,
        })
    }

    /// Number of levels `T`, counting the category level.
    pub fn n_levels(&self) -> usize {
        self.nodes.len() + 1
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn category_index(&self, label: &str) -> Option<usize> {
        self.category_index.get(label).copied()
    }

    /// Number of nodes at `level` (1-based).
    pub fn level_size(&self, level: usize) -> Result<usize> {
        self.check_level(level)?;
        Ok(if level == 1 {
            self.categories.len()
        } else {
            self.nodes[level - 2].len()
        })
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        (1..=self.n_levels())
            .map(|t| self.level_size(t).expect("in range"))
            .collect()
    }

    /// Clusters at `level >= 2`.
    pub fn clusters(&self, level: usize) -> Result<&[ClusterNode]> {
        self.check_level(level)?;
        if level == 1 {
            return Err(Error::param("level 1 holds categories, not clusters"));
        }
        Ok(&self.nodes[level - 2])
    }

    pub fn params(&self) -> &HierarchyParams {
        &self.params
    }

    fn check_level(&self, level: usize) -> Result<()> {
        if level == 0 || level > self.n_levels() {
            return Err(Error::LevelOutOfRange {
                level,
                levels: self.n_levels(),
            });
        }
        Ok(())
    }

    /// Ancestor id of a category (by dense index) at `level`.
    pub fn label_at(&self, category: usize, level: usize) -> Result<usize> {
        self.check_level(level)?;
        self.labels
            .get(category)
            .map(|row| row[level - 1])
            .ok_or_else(|| Error::UnknownCategory(format!("#{category}")))
    }

    /// All ancestor ids of a category, level 1 first.
    pub fn path(&self, category: usize) -> &[usize] {
        &self.labels[category]
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = HierarchyFile {
            levels: self.n_levels(),
            categories: self.categories.clone(),
            clusters: self.nodes.iter().flatten().cloned().collect(),
            params: self.params.clone(),
        };
        jsonl::write_json(path.as_ref(), &file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file: HierarchyFile = jsonl::read_json(path.as_ref())?;
        if file.levels < 2 {
            return Err(Error::param("a hierarchy needs at least two levels"));
        }
        let mut nodes = vec![Vec::new(); file.levels - 1];
        for node in file.clusters {
            if node.level < 2 || node.level > file.levels {
                return Err(Error::LevelOutOfRange {
                    level: node.level,
                    levels: file.levels,
                });
            }
            nodes[node.level - 2].push(node);
        }
        for level in &mut nodes {
            level.sort_by_key(|n| n.id);
        }
        Self::from_nodes(file.categories, nodes, file.params)
    }
}

/// Dense id of `category`'s ancestor at `level`; level 1 is the category's own index.
pub fn cluster_label_of(h: &Hierarchy, category: &str, level: usize) -> Result<usize> {
    let idx = h
        .category_index(category)
        .ok_or_else(|| Error::UnknownCategory(category.to_string()))?;
    h.label_at(idx, level)
}

/// Clusters `s` into level 2, then clusters the resulting nodes again for
/// each further level until `levels` levels exist.
pub fn build_hierarchy(s: &SimilarityMatrix, levels: usize, params: &ApParams) -> Result<Hierarchy> {
    if levels < 2 {
        return Err(Error::param(format!("levels must be at least 2, got {levels}")));
    }
    params.validate()?;
    let mut nodes = Vec::with_capacity(levels - 1);
    let mut iterations = Vec::new();
    let mut level_converged = Vec::new();
    let mut current = s.clone();
    for t in 2..=levels {
        let result = affinity_propagation(&current, params)?;
        log::debug!(
            "level {t}: {} nodes -> {} clusters in {} iterations",
            current.len(),
            result.n_clusters(),
            result.n_iterations
        );
        let level: Vec<ClusterNode> = result
            .clusters()
            .into_iter()
            .enumerate()
            .map(|(id, members)| ClusterNode {
                level: t,
                id,
                exemplar: current.labels()[result.exemplars[id]].clone(),
                members: members
                    .into_iter()
                    .map(|m| current.labels()[m].clone())
                    .collect(),
            })
            .collect();
        iterations.push(result.n_iterations);
        level_converged.push(result.converged);
        nodes.push(level);
        if t < levels {
            current = cluster_similarity(&current, &result)?;
        }
    }
    let params = HierarchyParams {
        preference: params.preference,
        damping: params.damping,
        max_iter: params.max_iter,
        stable_iters: params.stable_iters,
        iterations,
        converged: level_converged.iter().all(|&c| c),
        level_converged,
    };
    Hierarchy::from_nodes(s.labels().to_vec(), nodes, params)
}

/// Adjusted Rand index between two labelings of the same items.
///
/// Returns 1 when both labelings are identical up to renaming, including the
/// degenerate case where neither carries any pair information.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must cover the same items");
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let pairs = |c: u64| (c * c.saturating_sub(1) / 2) as f64;
    let index: f64 = table.values().map(|&c| pairs(c)).sum();
    let sum_rows: f64 = rows.values().map(|&c| pairs(c)).sum();
    let sum_cols: f64 = cols.values().map(|&c| pairs(c)).sum();
    let expected = sum_rows * sum_cols / pairs(n as u64);
    let max = 0.5 * (sum_rows + sum_cols);
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn matrix(labels: &[&str], values: Array2<f64>) -> SimilarityMatrix {
        SimilarityMatrix::new(labels.iter().map(|s| s.to_string()).collect(), values).unwrap()
    }

    fn result(exemplars: Vec<usize>, assignment: Vec<usize>) -> ClusteringResult {
        ClusteringResult {
            exemplars,
            assignment,
            n_iterations: 0,
            converged: true,
            preference: 0.0,
        }
    }

    #[test]
    fn cluster_similarity_is_mean_linkage() {
        let s = matrix(
            &["a", "b", "c"],
            array![[1.0, 0.9, 0.2], [0.9, 1.0, 0.4], [0.2, 0.4, 1.0]],
        );
        let c = cluster_similarity(&s, &result(vec![0, 2], vec![0, 0, 2])).unwrap();
        assert!((c.get(0, 1) - 0.3).abs() < 1e-15);
        assert_eq!(c.get(0, 0), 1.0);
        assert_eq!(c.labels(), ["a", "c"]);

        let singles = cluster_similarity(&s, &result(vec![0, 1, 2], vec![0, 1, 2])).unwrap();
        assert_eq!(singles.get(1, 2), 0.4);
    }

    fn blocks() -> SimilarityMatrix {
        let labels = ["a", "b", "c", "d", "e", "f"];
        let values = Array2::from_shape_fn((6, 6), |(i, j)| {
            if i == j {
                1.0
            } else if i / 3 == j / 3 {
                0.9
            } else {
                0.1
            }
        });
        matrix(&labels, values)
    }

    #[test]
    fn two_level_hierarchy_from_blocks() {
        let h = build_hierarchy(&blocks(), 2, &ApParams::default()).unwrap();
        assert_eq!(h.n_levels(), 2);
        assert_eq!(h.level_size(2).unwrap(), 2);
        let l = |c: &str| cluster_label_of(&h, c, 2).unwrap();
        assert_eq!(l("a"), l("b"));
        assert_eq!(l("b"), l("c"));
        assert_ne!(l("a"), l("d"));
        assert_eq!(cluster_label_of(&h, "e", 1).unwrap(), 4);
    }

    #[test]
    fn three_levels_nest() {
        let h = build_hierarchy(&blocks(), 3, &ApParams::default()).unwrap();
        assert_eq!(h.n_levels(), 3);
        for c in 0..6 {
            for t in 1..=3 {
                assert!(h.label_at(c, t).unwrap() < h.level_size(t).unwrap());
            }
        }
        // categories sharing a level-2 cluster share every higher ancestor
        for x in 0..6 {
            for y in 0..6 {
                if h.label_at(x, 2).unwrap() == h.label_at(y, 2).unwrap() {
                    assert_eq!(h.label_at(x, 3).unwrap(), h.label_at(y, 3).unwrap());
                }
            }
        }
    }

    #[test]
    fn lookup_errors() {
        let h = build_hierarchy(&blocks(), 2, &ApParams::default()).unwrap();
        assert!(matches!(cluster_label_of(&h, "zzz", 2), Err(Error::UnknownCategory(_))));
        assert!(matches!(
            cluster_label_of(&h, "a", 3),
            Err(Error::LevelOutOfRange { level: 3, levels: 2 })
        ));
        assert!(cluster_label_of(&h, "a", 0).is_err());
        assert!(build_hierarchy(&blocks(), 1, &ApParams::default()).is_err());
    }

    #[test]
    fn file_round_trip() {
        let h = build_hierarchy(&blocks(), 3, &ApParams::default()).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        h.save(f.path()).unwrap();
        assert_eq!(Hierarchy::load(f.path()).unwrap(), h);
    }

    #[test]
    fn from_nodes_rejects_non_partitions() {
        let params = HierarchyParams {
            preference: Preference::Median,
            damping: 0.5,
            max_iter: 1,
            stable_iters: 1,
            iterations: vec![1],
            converged: true,
            level_converged: vec![true],
        };
        let cats = vec!["a".to_string(), "b".to_string()];
        let node = |id, members: &[&str]| ClusterNode {
            level: 2,
            id,
            exemplar: members[0].to_string(),
            members: members.iter().map(|s| s.to_string()).collect(),
        };
        assert!(Hierarchy::from_nodes(cats.clone(), vec![vec![node(0, &["a"])]], params.clone()).is_err());
        assert!(Hierarchy::from_nodes(
            cats.clone(),
            vec![vec![node(0, &["a", "b"]), node(1, &["b"])]],
            params.clone()
        )
        .is_err());
        assert!(Hierarchy::from_nodes(cats, vec![vec![node(0, &["a", "b"])]], params).is_ok());
    }

    #[test]
    fn ari_examples() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[5, 5, 2, 2]), 1.0);
        assert!(adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]) < 0.0);
        // hand-computed: contingency [[2,1],[0,2]] -> index 2, rows 4, cols 4, C(5,2)=10
        let ari = adjusted_rand_index(&[0, 0, 0, 1, 1], &[0, 0, 1, 1, 1]);
        let expected = (2.0 - 4.0 * 4.0 / 10.0) / (4.0 - 1.6);
        assert!((ari - expected).abs() < 1e-12);
    }
}
