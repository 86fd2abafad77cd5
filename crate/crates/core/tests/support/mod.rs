//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use visual_hierarchy::detection::BoundingBox;
use visual_hierarchy::detections::{Detection, GroundTruthBox};
use visual_hierarchy::hierarchy::{ClusterNode, Hierarchy, HierarchyParams, Preference};
use visual_hierarchy::multitask::{multitask_loss, MultiTaskModel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

const MAX_DEPTH: u32 = 50;
const MIN_DEPTH: u32 = 4;

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
}

#[allow(clippy::too_many_arguments)]
fn adaptive(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    m: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let (lm, flm, left) = simpson(f, a, fa, m, fm);
    let (rm, frm, right) = simpson(f, m, fm, b, fb);
    let delta = left + right - whole;
    // the first levels always split: the integrand of interest has kinks
    // that a single coarse Simpson estimate can miss
    if depth == 0 || (depth <= MAX_DEPTH - MIN_DEPTH && delta.abs() <= 15.0 * tol) {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
        + adaptive(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`; the interval is first
/// cut into `pieces` panels so narrow peaks are not skipped.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, pieces: usize) -> f64 {
    let h = (b - a) / pieces as f64;
    let mut total = 0.0;
    for k in 0..pieces {
        let (lo, hi) = (a + k as f64 * h, a + (k + 1) as f64 * h);
        let (flo, fhi) = (f(lo), f(hi));
        let (m, fm, whole) = simpson(&f, lo, flo, hi, fhi);
        total += adaptive(&f, lo, flo, hi, fhi, m, fm, whole, tol / pieces as f64, MAX_DEPTH);
    }
    total
}

/// Area under `min(N(m1, s1²), N(m2, s2²))` by numerical integration.
pub fn ovl_quadrature(m1: f64, s1: f64, m2: f64, s2: f64) -> f64 {
    let smax = s1.max(s2);
    let lo = m1.min(m2) - 10.0 * smax;
    let hi = m1.max(m2) + 10.0 * smax;
    integrate(
        |x| normal_pdf(x, m1, s1).min(normal_pdf(x, m2, s2)),
        lo,
        hi,
        1e-9,
        64,
    )
}

/// Central finite-difference gradient of the multi-task loss.
pub fn numeric_gradient(
    model: &MultiTaskModel,
    batch: &[(&[f64], usize)],
    hierarchy: &Hierarchy,
    eps: f64,
) -> Vec<f64> {
    let theta = model.to_flat();
    let mut probe = model.clone();
    let mut grad = Vec::with_capacity(theta.len());
    let mut shifted = theta.clone();
    for i in 0..theta.len() {
        shifted[i] = theta[i] + eps;
        probe.set_flat(&shifted).unwrap();
        let up = multitask_loss(&probe, batch, hierarchy).unwrap();
        shifted[i] = theta[i] - eps;
        probe.set_flat(&shifted).unwrap();
        let down = multitask_loss(&probe, batch, hierarchy).unwrap();
        shifted[i] = theta[i];
        grad.push((up - down) / (2.0 * eps));
    }
    grad
}

/// Two-level hierarchy where category `c` belongs to cluster `groups[c]`;
/// clusters are numbered by first appearance.
pub fn two_level_hierarchy(groups: &[usize]) -> Hierarchy {
    let categories: Vec<String> = (0..groups.len()).map(|c| format!("c{c:02}")).collect();
    let mut order: Vec<usize> = Vec::new();
    for &g in groups {
        if !order.contains(&g) {
            order.push(g);
        }
    }
    let nodes: Vec<ClusterNode> = order
        .iter()
        .enumerate()
        .map(|(id, &g)| {
            let members: Vec<String> = (0..groups.len())
                .filter(|&c| groups[c] == g)
                .map(|c| categories[c].clone())
                .collect();
            ClusterNode {
                level: 2,
                id,
                exemplar: members[0].clone(),
                members,
            }
        })
        .collect();
    let params = HierarchyParams {
        preference: Preference::Median,
        damping: 0.5,
        max_iter: 500,
        stable_iters: 15,
        iterations: vec![0],
        converged: true,
        level_converged: vec![true],
    };
    Hierarchy::from_nodes(categories, vec![nodes], params).unwrap()
}

pub fn random_box(rng: &mut ChaCha8Rng, extent: f64) -> BoundingBox {
    let x = rng.random_range(0.0..extent);
    let y = rng.random_range(0.0..extent);
    let w = rng.random_range(1.0..extent / 2.0);
    let h = rng.random_range(1.0..extent / 2.0);
    BoundingBox::new(x, y, x + w, y + h).unwrap()
}

/// Random scored boxes on one image; scores are coarse so ties occur.
pub fn random_detections(rng: &mut ChaCha8Rng, image: &str, n: usize, extent: f64) -> Vec<Detection> {
    (0..n)
        .map(|_| {
            let score = (rng.random_range(0.0..=1.0f64) * 20.0).round() / 20.0;
            Detection::new(image, random_box(rng, extent), score).unwrap()
        })
        .collect()
}

pub fn random_ground_truth(rng: &mut ChaCha8Rng, image: &str, n: usize, extent: f64) -> Vec<GroundTruthBox> {
    (0..n)
        .map(|_| GroundTruthBox::new(image, random_box(rng, extent), "food"))
        .collect()
}

/// Suppression result characterised without a greedy walk: the kept set is
/// the unique subset in which no two members overlap above `threshold` and
/// every excluded box overlaps some better-ranked member above it. Ranking is
/// by descending score, ties by input position. Found by enumerating all
/// subsets, so only for small inputs.
pub fn brute_force_nms(dets: &[Detection], threshold: f64) -> Vec<Detection> {
    let n = dets.len();
    assert!(n <= 16);
    let mut rank: Vec<usize> = (0..n).collect();
    rank.sort_by(|&a, &b| dets[b].score.partial_cmp(&dets[a].score).unwrap().then(a.cmp(&b)));
    let mut pos = vec![0; n];
    for (r, &i) in rank.iter().enumerate() {
        pos[i] = r;
    }
    let overlaps = |a: usize, b: usize| dets[a].bbox.iou(&dets[b].bbox) > threshold;
    let mut solutions = Vec::new();
    for mask in 0u32..(1 << n) {
        let inside = |i: usize| mask & (1 << i) != 0;
        let independent = (0..n)
            .all(|i| !inside(i) || (0..n).all(|j| j == i || !inside(j) || !overlaps(i, j)));
        let covered = (0..n).all(|i| {
            inside(i) || (0..n).any(|j| inside(j) && pos[j] < pos[i] && overlaps(i, j))
        });
        if independent && covered {
            solutions.push(mask);
        }
    }
    assert_eq!(solutions.len(), 1, "keep rule has a unique solution");
    let mask = solutions[0];
    rank.into_iter()
        .filter(|&i| mask & (1 << i) != 0)
        .map(|i| dets[i].clone())
        .collect()
}
