//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; the process fails if any criterion does.

mod support;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use ndarray::ArrayView1;
use rand::Rng;
use visual_hierarchy::dataset::{split_dataset, SplitSpec};
use visual_hierarchy::detection::{
    average_precision, f_measure, match_detections, nms, sweep_thresholds, BoundingBox, Interpolation,
};
use visual_hierarchy::detections::{Detection, GroundTruthBox};
use visual_hierarchy::hierarchy::{adjusted_rand_index, build_hierarchy, ApParams};
use visual_hierarchy::multitask::{
    evaluate_classification, loss_gradient, multitask_loss, train, ModelSpec, MultiTaskModel, TrainConfig,
};
use visual_hierarchy::pipeline::{compare_flat_vs_hierarchical, run_full_pipeline, PipelineConfig};
use visual_hierarchy::similarity::{ovl, similarity_matrix, GaussianFit, SimilarityOptions};
use visual_hierarchy::synth::{synthesize_dataset, SyntheticSpec};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_secs as f64, || {
        format!("took {:.2}s, limit {limit_secs}s", elapsed.as_secs_f64())
    })
}

fn ovl_oracle() -> Outcome {
    let mut rng = support::rng(2024);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (m1, m2) = (rng.random_range(-10.0..=10.0), rng.random_range(-10.0..=10.0));
        let (s1, s2) = (rng.random_range(0.1..=5.0), rng.random_range(0.1..=5.0));
        let closed = ovl(&GaussianFit::new(m1, s1).unwrap(), &GaussianFit::new(m2, s2).unwrap());
        let numeric = support::ovl_quadrature(m1, s1, m2, s2);
        let err = (closed - numeric).abs();
        worst = worst.max(err);
        ensure(err <= 1e-6, || {
            format!("N({m1}, {s1}) vs N({m2}, {s2}): closed {closed}, quadrature {numeric}")
        })?;
    }
    within(start.elapsed(), 5)?;
    Ok(format!("1000 pairs, max |error| {worst:.2e}, {:.2}s", start.elapsed().as_secs_f64()))
}

fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
}

fn gradient_check() -> Outcome {
    let mut rng = support::rng(7);
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut with_hidden = 0;
    for instance in 0..100 {
        let dim = rng.random_range(1..=32);
        let n1 = rng.random_range(2..=10);
        let n2 = rng.random_range(1..=n1.min(4));
        let groups: Vec<usize> = (0..n1).map(|c| if c < n2 { c } else { rng.random_range(0..n2) }).collect();
        let h = support::two_level_hierarchy(&groups);
        let hidden = (instance % 2 == 1).then(|| rng.random_range(1..=8));
        let lambdas = vec![rng.random_range(0.1..=1.0), rng.random_range(0.1..=1.0)];
        let spec = ModelSpec::for_hierarchy(dim, &h, 2, hidden, lambdas).unwrap();
        let mut model = MultiTaskModel::new(&spec, instance).unwrap();

        let n = rng.random_range(1..=8);
        let xs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(-2.0..=2.0)).collect())
            .collect();
        let ys: Vec<usize> = (0..n).map(|_| rng.random_range(0..n1)).collect();
        // ReLU pre-activations must stay clear of zero so the central
        // difference never straddles the kink.
        loop {
            let theta: Vec<f64> = (0..model.n_params()).map(|_| rng.random_range(-1.0..=1.0)).collect();
            model.set_flat(&theta).unwrap();
            let clear = match model.shared() {
                None => true,
                Some(layer) => xs
                    .iter()
                    .all(|x| layer.forward(ArrayView1::from(x)).iter().all(|z| z.abs() > 1e-3)),
            };
            if clear {
                break;
            }
        }
        with_hidden += usize::from(hidden.is_some());

        let batch: Vec<(&[f64], usize)> = xs.iter().map(Vec::as_slice).zip(ys.iter().copied()).collect();
        let analytic = loss_gradient(&model, &batch, &h).unwrap().to_flat();
        let numeric = support::numeric_gradient(&model, &batch, &h, 1e-5);
        for (i, (&a, &b)) in analytic.iter().zip(&numeric).enumerate() {
            let err = relative_error(a, b);
            worst = worst.max(err);
            ensure(err <= 1e-4, || {
                format!("instance {instance}, parameter {i}: analytic {a}, numeric {b}")
            })?;
        }
    }
    within(start.elapsed(), 30)?;
    Ok(format!(
        "100 instances ({with_hidden} with a hidden layer), max relative error {worst:.2e}"
    ))
}

fn planted_hierarchy() -> Outcome {
    let start = Instant::now();
    let mut aris = Vec::new();
    for seed in 0..10 {
        let data = synthesize_dataset(&SyntheticSpec {
            n_categories: 20,
            n_groups: 4,
            dim: 32,
            samples_per_category: 100,
            seed,
            ..SyntheticSpec::default()
        })
        .map_err(|e| e.to_string())?;
        let sim = similarity_matrix(&data.dataset, SimilarityOptions::default()).map_err(|e| e.to_string())?;
        let h = build_hierarchy(&sim, 2, &ApParams::default()).map_err(|e| e.to_string())?;
        let found: Vec<usize> = (0..20).map(|c| h.label_at(c, 2).unwrap()).collect();
        aris.push(adjusted_rand_index(&found, &data.groups));
    }
    let good = aris.iter().filter(|&&a| a >= 0.9).count();
    ensure(good >= 9, || format!("only {good}/10 seeds reach ARI 0.9: {aris:?}"))?;
    within(start.elapsed(), 60)?;
    let min = aris.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(format!("{good}/10 seeds with ARI >= 0.9, min ARI {min:.4}"))
}

fn reference_cross_entropy(logits: &[f64], y: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_z = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    log_z - logits[y]
}

fn flat_reduction() -> Outcome {
    let mut rng = support::rng(11);
    let mut worst = 0.0f64;
    for instance in 0..200 {
        let dim = rng.random_range(1..=32);
        let n1 = rng.random_range(2..=12);
        let h = support::two_level_hierarchy(&vec![0; n1]);
        let spec = ModelSpec::for_hierarchy(dim, &h, 1, None, vec![1.0]).unwrap();
        let mut model = MultiTaskModel::new(&spec, instance).unwrap();
        let theta: Vec<f64> = (0..model.n_params()).map(|_| rng.random_range(-1.0..=1.0)).collect();
        model.set_flat(&theta).unwrap();

        let n = rng.random_range(1..=16);
        let xs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(-2.0..=2.0)).collect())
            .collect();
        let ys: Vec<usize> = (0..n).map(|_| rng.random_range(0..n1)).collect();
        let batch: Vec<(&[f64], usize)> = xs.iter().map(Vec::as_slice).zip(ys.iter().copied()).collect();

        let head = &model.heads()[0];
        let expected: f64 = batch
            .iter()
            .map(|&(x, y)| {
                let logits: Vec<f64> = (0..n1)
                    .map(|k| head.bias[k] + (0..dim).map(|d| head.weight[[k, d]] * x[d]).sum::<f64>())
                    .collect();
                reference_cross_entropy(&logits, y)
            })
            .sum();
        let got = multitask_loss(&model, &batch, &h).map_err(|e| e.to_string())?;
        let err = (got - expected).abs();
        worst = worst.max(err);
        ensure(err <= 1e-12, || format!("instance {instance}: loss {got}, reference {expected}"))?;
    }
    Ok(format!("200 random batches, max |difference| {worst:.2e}"))
}

fn cluster_dominance() -> Outcome {
    let mut rng = support::rng(5);
    let mut runs = 0;
    for seed in 0..40u64 {
        let n_groups = rng.random_range(1..=4);
        let spec = SyntheticSpec {
            n_categories: rng.random_range(n_groups.max(2)..=12),
            n_groups,
            dim: rng.random_range(2..=16),
            samples_per_category: 10,
            seed,
            ..SyntheticSpec::default()
        };
        let data = synthesize_dataset(&spec).map_err(|e| e.to_string())?;
        let groups: Vec<usize> = data.groups.clone();
        let h = support::two_level_hierarchy(&groups);
        let ds = visual_hierarchy::dataset::LabeledDataset::new(
            data.dataset
                .records()
                .iter()
                .map(|r| {
                    let c = data.dataset.category_index(&r.label).unwrap();
                    visual_hierarchy::dataset::FeatureRecord {
                        label: h.categories()[c].clone(),
                        ..r.clone()
                    }
                })
                .collect(),
        )
        .map_err(|e| e.to_string())?;
        let heads = rng.random_range(1..=2);
        let lambdas = vec![0.5; heads];
        let hidden = (seed % 3 == 0).then_some(6);
        let model_spec = ModelSpec::for_hierarchy(spec.dim, &h, heads, hidden, lambdas).unwrap();
        let mut model = MultiTaskModel::new(&model_spec, seed).unwrap();
        let theta: Vec<f64> = (0..model.n_params()).map(|_| rng.random_range(-1.0..=1.0)).collect();
        model.set_flat(&theta).unwrap();
        let m = evaluate_classification(&model, &ds, &h).map_err(|e| e.to_string())?;
        ensure(m.cluster_correct >= m.correct, || {
            format!("random model {seed}: cluster {} < top1 {}", m.cluster_correct, m.correct)
        })?;
        runs += 1;

        if seed % 8 == 0 {
            let split = split_dataset(&ds, &SplitSpec { seed, ..SplitSpec::default() }).map_err(|e| e.to_string())?;
            let cfg = TrainConfig { epochs: 5, fine_tune_epochs: 2, seed, ..TrainConfig::default() };
            let trained = train(&model, &split.train, &split.val, &h, &cfg).map_err(|e| e.to_string())?;
            let m = evaluate_classification(&trained.model, &split.test, &h).map_err(|e| e.to_string())?;
            ensure(m.cluster_correct >= m.correct, || {
                format!("trained model {seed}: cluster {} < top1 {}", m.cluster_correct, m.correct)
            })?;
            runs += 1;
        }
    }
    Ok(format!("{runs} evaluation runs, cluster_correct >= correct in all"))
}

fn f_measure_consistency() -> Outcome {
    let table = [
        (0.8159, 0.8604, 0.8376),
        (0.9388, 0.8764, 0.9065),
        (0.7926, 0.6372, 0.7064),
    ];
    let mut shown = Vec::new();
    for (p, r, printed) in table {
        let f = f_measure(p, r);
        ensure((f - printed).abs() <= 5e-4, || format!("F({p}, {r}) = {f}, printed {printed}"))?;
        shown.push(format!("{f:.4}"));
    }
    Ok(format!("F = {}", shown.join(", ")))
}

fn gt_box(image: &str, b: BoundingBox) -> GroundTruthBox {
    GroundTruthBox::new(image, b, "x")
}

fn detection_oracles() -> Outcome {
    let mut rng = support::rng(99);
    let mut kept_total = 0;
    for instance in 0..500 {
        let n = rng.random_range(0..=10);
        let dets = support::random_detections(&mut rng, "img", n, 50.0);
        let g = rng.random_range(0..=6);
        let gts = support::random_ground_truth(&mut rng, "img", g, 50.0);
        let threshold = rng.random_range(0.05..=0.95);
        let greedy = nms(&dets, threshold).map_err(|e| e.to_string())?;
        let brute = support::brute_force_nms(&dets, threshold);
        ensure(greedy == brute, || format!("instance {instance}: nms disagrees with the keep rule"))?;
        kept_total += greedy.len();

        for label_aware in [false, true] {
            let m = match_detections(&dets, &gts, rng.random_range(0.1..=0.9), label_aware);
            let c = m.counts;
            ensure(c.tp + c.fn_ == gts.len() as u64 && c.tp + c.fp == dets.len() as u64, || {
                format!("instance {instance}: counts {c:?} for {} dets, {} gts", dets.len(), gts.len())
            })?;
        }
    }

    let truth = BoundingBox::new(0.0, 0.0, 10.0, 10.0).unwrap();
    let elsewhere = BoundingBox::new(50.0, 50.0, 60.0, 60.0).unwrap();
    let gts = vec![gt_box("a", truth)];
    let hit = |score| Detection::new("a", truth, score).unwrap().with_label("x");
    let miss = |score| Detection::new("a", elsewhere, score).unwrap().with_label("x");
    let tp_fp = average_precision(&[hit(0.9), miss(0.8)], &gts, 0.5, Interpolation::AllPoint);
    let fp_tp = average_precision(&[hit(0.8), miss(0.9)], &gts, 0.5, Interpolation::AllPoint);
    ensure(tp_fp == Some(1.0), || format!("[TP, FP] gave {tp_fp:?}"))?;
    ensure(fp_tp == Some(0.5), || format!("[FP, TP] gave {fp_tp:?}"))?;
    Ok(format!("500 NMS instances ({kept_total} boxes kept), count identities hold, AP 1.0 and 0.5"))
}

fn sweep_contract() -> Outcome {
    let mut rng = support::rng(21);
    let expected: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    for instance in 0..100 {
        let mut dets = Vec::new();
        let mut gts = Vec::new();
        for img in 0..rng.random_range(1..=4) {
            let id = format!("img{img}");
            let n = rng.random_range(0..=12);
            dets.extend(support::random_detections(&mut rng, &id, n, 60.0));
            let g = rng.random_range(0..=5);
            gts.extend(support::random_ground_truth(&mut rng, &id, g, 60.0));
        }
        let table = sweep_thresholds(&dets, &gts, 21, 0.5).map_err(|e| e.to_string())?;
        let thresholds: Vec<f64> = table.rows.iter().map(|r| r.threshold).collect();
        ensure(thresholds == expected, || format!("instance {instance}: thresholds {thresholds:?}"))?;
        let printed: Vec<String> = thresholds.iter().map(|t| format!("{t:.2}")).collect();
        ensure(printed.first().map(String::as_str) == Some("0.00") && printed[20] == "1.00", || {
            format!("instance {instance}: printed {printed:?}")
        })?;
        for w in table.rows.windows(2) {
            ensure(w[1].recall <= w[0].recall, || {
                format!("instance {instance}: recall rises at threshold {}", w[1].threshold)
            })?;
        }
    }
    Ok("100 random sets, 21 exact thresholds, recall non-increasing".to_string())
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        files.insert(
            path.file_name().unwrap().to_string_lossy().into_owned(),
            std::fs::read(&path).unwrap(),
        );
    }
    files
}

fn bundled_config() -> Result<PipelineConfig, String> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/synthetic.toml");
    PipelineConfig::load(path).map_err(|e| e.to_string())
}

fn end_to_end_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut config = bundled_config()?;
    config.out = tmp.path().join("run");

    let start = Instant::now();
    run_full_pipeline(&config).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    within(elapsed, 60)?;
    let first = snapshot(&config.out);
    for required in ["sim.json", "hier.json", "model.json", "metrics.json", "sweep.csv", "manifest.json"] {
        ensure(first.contains_key(required), || format!("missing artifact {required}"))?;
    }

    run_full_pipeline(&config).map_err(|e| e.to_string())?;
    let second = snapshot(&config.out);
    for (name, bytes) in &first {
        ensure(second.get(name) == Some(bytes), || format!("{name} differs on rerun"))?;
    }

    // re-executing from the manifest reproduces every artifact
    let mut replay = PipelineConfig::load(config.out.join("manifest.json")).map_err(|e| e.to_string())?;
    ensure(replay == config, || "manifest does not round-trip the config".to_string())?;
    replay.out = tmp.path().join("replay");
    run_full_pipeline(&replay).map_err(|e| e.to_string())?;
    let third = snapshot(&replay.out);
    for (name, bytes) in &first {
        if name != "manifest.json" {
            ensure(third.get(name) == Some(bytes), || format!("{name} differs when replayed"))?;
        }
    }
    Ok(format!(
        "{} artifacts byte-identical across reruns, first run {:.2}s",
        first.len(),
        elapsed.as_secs_f64()
    ))
}

fn synthetic_classification() -> Outcome {
    let spec = SyntheticSpec {
        noise_sigma: 0.05,
        samples_per_category: 50,
        seed: 3,
        ..SyntheticSpec::default()
    };
    let data = synthesize_dataset(&spec).map_err(|e| e.to_string())?;
    let split = split_dataset(&data.dataset, &SplitSpec::default()).map_err(|e| e.to_string())?;
    let sim = similarity_matrix(&split.train, SimilarityOptions::default()).map_err(|e| e.to_string())?;
    let h = build_hierarchy(&sim, 2, &ApParams::default()).map_err(|e| e.to_string())?;
    let model_spec = ModelSpec::for_hierarchy(split.train.dim(), &h, 2, None, vec![0.5, 0.5]).unwrap();
    let model = MultiTaskModel::new(&model_spec, 0).unwrap();
    let trained = train(&model, &split.train, &split.val, &h, &TrainConfig::default()).map_err(|e| e.to_string())?;
    let m = evaluate_classification(&trained.model, &split.test, &h).map_err(|e| e.to_string())?;
    ensure(m.top1 >= 0.95, || format!("test top1 {}", m.top1))?;

    let config = PipelineConfig {
        synthetic: Some(spec),
        synthetic_detections: None,
        ..bundled_config()?
    };
    let report = compare_flat_vs_hierarchical(&config).map_err(|e| e.to_string())?;
    let variants: Vec<&str> = report.rows.iter().map(|r| r.variant.as_str()).collect();
    ensure(variants == ["FC", "HC", "HC-FT"], || format!("variants {variants:?}"))?;
    let cells: Vec<String> = report
        .rows
        .iter()
        .map(|r| format!("{} {:.3}/{:.3}", r.variant, r.top1, r.cluster_top1))
        .collect();
    Ok(format!("test top1 {:.4}; compare rows {}", m.top1, cells.join(", ")))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("closed-form OVL matches quadrature", ovl_oracle),
        ("gradient matches central differences", gradient_check),
        ("planted hierarchy recovered", planted_hierarchy),
        ("flat reduction identity", flat_reduction),
        ("cluster top-1 dominates top-1", cluster_dominance),
        ("F-measure consistency with published table", f_measure_consistency),
        ("NMS, matching and AP oracles", detection_oracles),
        ("threshold sweep contract", sweep_contract),
        ("end-to-end determinism", end_to_end_determinism),
        ("synthetic classification sanity", synthetic_classification),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match std::panic::catch_unwind(check) {
            Ok(Ok(detail)) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Ok(Err(why)) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
            Err(_) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: panicked", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
