mod support;

use rand::Rng;
use visual_hierarchy::dataset::{load_embeddings, write_embeddings, FeatureRecord, LabeledDataset};
use visual_hierarchy::detections::{load_detections, load_ground_truth, write_detections, write_ground_truth};
use visual_hierarchy::Error;

#[test]
fn detections_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = support::rng(1);
    let mut dets = Vec::new();
    for img in 0..50 {
        dets.extend(support::random_detections(&mut rng, &format!("img{img}"), 10, 500.0));
    }
    for (i, d) in dets.iter_mut().enumerate() {
        d.score = rng.random_range(0.0..=1.0);
        if i % 3 == 0 {
            d.label = Some(format!("class{}", i % 7));
        }
    }
    assert_eq!(dets.len(), 500);
    let path = dir.path().join("dets.jsonl");
    write_detections(&path, &dets).unwrap();
    assert_eq!(load_detections(&path).unwrap(), dets);

    let gts = support::random_ground_truth(&mut rng, "img0", 40, 500.0);
    let path = dir.path().join("gts.jsonl");
    write_ground_truth(&path, &gts).unwrap();
    assert_eq!(load_ground_truth(&path).unwrap(), gts);
}

#[test]
fn large_embeddings_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = support::rng(2);
    let records: Vec<FeatureRecord> = (0..10_000)
        .map(|i| FeatureRecord {
            id: format!("r{i:05}"),
            label: format!("c{}", i % 25),
            features: (0..1024).map(|_| rng.random_range(-3.0..3.0)).collect(),
        })
        .collect();
    let ds = LabeledDataset::new(records).unwrap();
    let path = dir.path().join("big.jsonl");
    write_embeddings(&path, &ds).unwrap();
    let back = load_embeddings(&path).unwrap();
    assert_eq!(back.dim(), 1024);
    assert_eq!(back.records(), ds.records());
    assert_eq!(back.categories(), ds.categories());
}

#[test]
fn loader_reports_the_offending_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.jsonl");
    std::fs::write(
        &path,
        "{\"id\":\"a\",\"label\":\"x\",\"features\":[1,2]}\n\n{\"id\":\"b\",\"label\":\"x\",\"features\":[1]}\n",
    )
    .unwrap();
    let err = load_embeddings(&path).unwrap_err();
    assert!(matches!(err, Error::InconsistentDimension { line: 3, .. }), "{err}");
    assert!(err.to_string().contains("inconsistent dimension"));

    std::fs::write(&path, "{\"image_id\":\"i\",\"box\":[0,0,1,1],\"score\":1.5}\n").unwrap();
    let err = load_detections(&path).unwrap_err();
    assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");

    std::fs::write(&path, "{\"image_id\":\"i\",\"box\":[5,0,1,1],\"score\":0.5}\n").unwrap();
    assert!(load_detections(&path).is_err());

    std::fs::write(&path, "not json\n").unwrap();
    assert!(matches!(load_embeddings(&path).unwrap_err(), Error::Parse { line: 1, .. }));

    std::fs::write(&path, "\n").unwrap();
    assert!(matches!(load_embeddings(&path).unwrap_err(), Error::EmptyFile(_)));
}
