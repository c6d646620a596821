use std::fs;
use std::time::Instant;

use citysolution_core::classifier::{
    classify, evaluate_model, evaluate_predictions, load_dataset_dir, load_model, preprocess,
    split_dataset, test_count, train_baseline, EvaluationReport, LabeledItem, PredictionFile,
    TrainingConfig,
};
use citysolution_core::testkit::{noisy_color_tensor, photo_of, solid_png, CLASS_COLORS};
use citysolution_core::Category;
use proptest::prelude::*;

const TOTALS: [u64; 4] = [161, 178, 243, 244];
const CORRECT: [u64; 4] = [160, 174, 239, 240];

/// Test items with the given class totals and a prediction file that gets
/// `correct[k]` of class k right and assigns the rest to the next class.
fn fixture(totals: [u64; 4], correct: [u64; 4]) -> (Vec<LabeledItem<()>>, PredictionFile) {
    let mut items = Vec::new();
    let mut predictions = PredictionFile::default();
    for (k, class) in Category::MODEL_CLASSES.iter().enumerate() {
        for i in 0..totals[k] {
            let id = format!("{class}/{i:04}.jpg");
            let predicted = if i < correct[k] {
                *class
            } else {
                Category::MODEL_CLASSES[(k + 1) % 4]
            };
            predictions.insert(id.clone(), predicted);
            items.push(LabeledItem::new(id, *class, ()));
        }
    }
    (items, predictions)
}

#[test]
fn published_confusion_counts() {
    let start = Instant::now();
    let (items, predictions) = fixture(TOTALS, CORRECT);
    let parsed = PredictionFile::parse(&predictions.to_text()).unwrap();
    assert_eq!(parsed, predictions);
    let report = evaluate_predictions(&parsed, &items).unwrap();
    assert_eq!(report.totals, TOTALS);
    assert_eq!(report.total, 826);
    assert_eq!(report.correct, 813);
    assert!((report.accuracy - 813.0 / 826.0).abs() < 1e-12);
    assert!((report.accuracy - 0.984262).abs() < 1e-6);
    for (got, want) in report
        .recall
        .iter()
        .zip([0.993789, 0.977528, 0.983539, 0.983607])
    {
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    }
    for k in 0..4 {
        assert_eq!(report.confusion[k][k], CORRECT[k]);
        assert_eq!(report.confusion[k][(k + 1) % 4], TOTALS[k] - CORRECT[k]);
    }
    assert!(start.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn report_serializes_every_metric() {
    let (items, predictions) = fixture([3, 3, 3, 3], [3, 2, 1, 0]);
    let report = evaluate_predictions(&predictions, &items).unwrap();
    let v = serde_json::to_value(&report).unwrap();
    for field in [
        "labels",
        "confusion",
        "accuracy",
        "recall",
        "precision",
        "f1",
    ] {
        assert!(v.get(field).is_some(), "{field}");
    }
    assert_eq!(v["labels"][0], "DamagedRoad");
    let back: EvaluationReport = serde_json::from_value(v).unwrap();
    assert_eq!(back, report);
}

#[test]
fn published_split_sizes() {
    let sizes = [1072usize, 1183, 1616, 1623];
    let expected = [161usize, 178, 243, 244];
    for (n, t) in sizes.iter().zip(expected) {
        assert_eq!(test_count(*n, 0.85), t);
    }
    let items: Vec<_> = Category::MODEL_CLASSES
        .iter()
        .zip(sizes)
        .flat_map(|(c, n)| (0..n).map(move |i| LabeledItem::new(format!("{c}/{i}"), *c, ())))
        .collect();
    let split = split_dataset(items, 0.85, 42).unwrap();
    for (k, class) in Category::MODEL_CLASSES.iter().enumerate() {
        let test = split.test.iter().filter(|i| i.label == *class).count();
        let train = split.train.iter().filter(|i| i.label == *class).count();
        assert_eq!(test, expected[k]);
        assert_eq!(train + test, sizes[k]);
    }
    assert_eq!(split.test.len(), 826);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn ceiling_rule_matches_integer_oracle(n in 1usize..20_000, train_pct in 0usize..=100) {
        let held_out_pct = 100 - train_pct;
        let oracle = (held_out_pct * n).div_ceil(100);
        prop_assert_eq!(test_count(n, train_pct as f64 / 100.0), oracle);
    }

    #[test]
    fn split_is_a_seeded_partition(sizes in prop::array::uniform4(1usize..60), seed in any::<u64>()) {
        let items: Vec<_> = Category::MODEL_CLASSES
            .iter()
            .zip(sizes)
            .flat_map(|(c, n)| (0..n).map(move |i| LabeledItem::new(format!("{c}/{i}"), *c, ())))
            .collect();
        let a = split_dataset(items.clone(), 0.85, seed).unwrap();
        let b = split_dataset(items.clone(), 0.85, seed).unwrap();
        prop_assert_eq!(&a, &b);
        let mut ids: Vec<_> = a.train.iter().chain(&a.test).map(|i| i.id.clone()).collect();
        ids.sort();
        let mut all: Vec<_> = items.iter().map(|i| i.id.clone()).collect();
        all.sort();
        prop_assert_eq!(ids, all);
    }
}

#[test]
fn baseline_learns_synthetic_colors() {
    let start = Instant::now();
    let items: Vec<_> = Category::MODEL_CLASSES
        .iter()
        .enumerate()
        .flat_map(|(k, c)| {
            (0..100u64).map(move |i| LabeledItem::new(format!("{c}/{i}"), *c, (k as u64) << 32 | i))
        })
        .collect();
    let split = split_dataset(items, 0.8, 2024).unwrap();
    assert_eq!(split.train.len(), 320);
    assert_eq!(split.test.len(), 80);

    let train: Vec<_> = split
        .train
        .iter()
        .map(|i| (i.label, noisy_color_tensor(i.label, 0.05, i.data)))
        .collect();
    let model = train_baseline(
        train.iter().map(|(c, t)| (*c, t)),
        TrainingConfig::default(),
    )
    .unwrap();
    assert_eq!(model.class_counts(), &[80, 80, 80, 80]);
    let test: Vec<_> = split
        .test
        .iter()
        .map(|i| (i.label, noisy_color_tensor(i.label, 0.05, i.data)))
        .collect();
    let report = evaluate_model(&model, test.iter().map(|(c, t)| (*c, t))).unwrap();
    assert!(report.accuracy >= 0.95, "accuracy {}", report.accuracy);
    assert!(start.elapsed().as_secs_f64() < 10.0);

    // the learned centroids sit close to the generating colors
    for (learned, color) in model.centroids().iter().zip(CLASS_COLORS) {
        for (l, c) in learned.iter().zip(color) {
            assert!((l - f64::from(c) / 255.0).abs() < 0.01);
        }
    }
}

#[test]
fn dataset_directory_to_artifact_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let dirs = ["Damaged Road", "Flood", "Trash", "Homeless People"];
    for (k, name) in dirs.iter().enumerate() {
        fs::create_dir(dir.path().join(name)).unwrap();
        for i in 0..10u8 {
            let [r, g, b] = CLASS_COLORS[k];
            let shade = [
                r.saturating_add(i),
                g.saturating_sub(i),
                b.saturating_add(i / 2),
            ];
            fs::write(
                dir.path().join(name).join(format!("{i}.png")),
                solid_png(shade),
            )
            .unwrap();
        }
    }
    let items = load_dataset_dir(dir.path()).unwrap();
    assert_eq!(items.len(), 40);
    let split = split_dataset(items, 0.8, 1).unwrap();
    let load = |item: &LabeledItem<std::path::PathBuf>| {
        preprocess(&fs::read(&item.data).unwrap()).unwrap()
    };
    let train: Vec<_> = split.train.iter().map(|i| (i.label, load(i))).collect();
    let model = train_baseline(
        train.iter().map(|(c, t)| (*c, t)),
        TrainingConfig::default(),
    )
    .unwrap();

    let artifact = dir.path().join("model.json");
    model.save(&artifact).unwrap();
    let loaded = load_model(&artifact).unwrap();
    let mut predictions = PredictionFile::default();
    for item in &split.test {
        let tensor = load(item);
        let a = classify(&model, &tensor).unwrap();
        let b = classify(loaded.as_ref(), &tensor).unwrap();
        assert_eq!(a, b);
        predictions.insert(item.id.clone(), b.label);
    }
    let report = evaluate_predictions(&predictions, &split.test).unwrap();
    assert_eq!(report.accuracy, 1.0);
}

#[test]
fn predictions_never_yield_fake() {
    let model = citysolution_core::testkit::color_model();
    for rgb in [[0, 0, 0], [255, 255, 255], [255, 0, 255], [10, 200, 250]] {
        let p = classify(model.as_ref(), &preprocess(&solid_png(rgb)).unwrap()).unwrap();
        assert!(p.label.is_model_class());
        let sum: f64 = p.probabilities.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }
    let p = classify(
        model.as_ref(),
        &preprocess(&photo_of(Category::Flood)).unwrap(),
    )
    .unwrap();
    assert_eq!(p.label, Category::Flood);
}
