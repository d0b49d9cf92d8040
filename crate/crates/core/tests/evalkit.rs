mod common;

use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rflab_core::dsp::{FeatureKind, FeatureTensor};
use rflab_core::eval::*;
use rflab_core::model::{build_mbed_atn, MbedAtn};
use rflab_core::sim::{Example, Split};
use rflab_core::Error;

use common::kpi::brute_force;

#[test]
fn diagonal_and_single_example() {
    let labels = vec![0, 1, 2, 2, 1, 0];
    let cm = confusion(&labels, &labels, 3).unwrap();
    for (i, row) in cm.counts.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            assert_eq!(v > 0, i == j);
        }
    }
    assert_eq!((tpr(&cm).unwrap(), fpr(&cm).unwrap(), top1(&cm).unwrap()), (1.0, 0.0, 1.0));

    let cm = confusion(&[1], &[0], 2).unwrap();
    assert_eq!(cm.counts, vec![vec![0, 1], vec![0, 0]]);
}

#[test]
fn hand_worked_two_class_matrix() {
    let cm = ConfusionMatrix::from_counts(vec![vec![8, 2], vec![4, 6]]).unwrap();
    assert!((tpr(&cm).unwrap() - 0.7).abs() < 1e-15);
    assert!((fpr(&cm).unwrap() - 0.3).abs() < 1e-15);
    assert!((top1(&cm).unwrap() - 0.7).abs() < 1e-15);
    let wrong = ConfusionMatrix::from_counts(vec![vec![0, 5], vec![5, 0]]).unwrap();
    assert_eq!(tpr(&wrong).unwrap(), 0.0);
}

#[test]
fn errors_on_degenerate_input() {
    assert!(matches!(confusion(&[0, 3], &[0, 1], 3), Err(Error::Argument(_))));
    assert!(matches!(confusion(&[0], &[0, 1], 3), Err(Error::Argument(_))));
    let empty = ConfusionMatrix::from_counts(vec![vec![0, 0], vec![0, 0]]).unwrap();
    assert!(tpr(&empty).is_err());
    let missing_row = ConfusionMatrix::from_counts(vec![vec![3, 0], vec![0, 0]]).unwrap();
    match top1(&missing_row) {
        Err(Error::Argument(msg)) => assert!(msg.contains("class 1")),
        other => panic!("{other:?}"),
    }
    // every example is class 0 and predicted 0: class 0 has no negatives
    let no_negatives = ConfusionMatrix::from_counts(vec![vec![4, 0], vec![0, 0]]).unwrap();
    match fpr(&no_negatives) {
        Err(Error::Argument(msg)) => assert!(msg.contains("class 0")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn random_instances_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1000 {
        let l = rng.gen_range(2..8);
        let n = rng.gen_range(l * 3..200);
        // every class appears as a label, so all KPIs are defined
        let labels: Vec<usize> = (0..n).map(|i| if i < l { i } else { rng.gen_range(0..l) }).collect();
        let preds: Vec<usize> = labels
            .iter()
            .map(|&t| if rng.gen_bool(0.6) { t } else { rng.gen_range(0..l) })
            .collect();
        let cm = confusion(&preds, &labels, l).unwrap();
        let row_sums: Vec<u64> = cm.counts.iter().map(|r| r.iter().sum()).collect();
        let recount: Vec<u64> = (0..l).map(|c| labels.iter().filter(|&&t| t == c).count() as u64).collect();
        assert_eq!(row_sums, recount);
        let (t, f, a) = brute_force(&preds, &labels, l);
        assert_eq!(tpr(&cm).unwrap(), t);
        assert_eq!(fpr(&cm).unwrap(), f);
        assert_eq!(top1(&cm).unwrap(), a);
    }
}

#[test]
fn uniform_random_predictions() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let l = 5;
    let labels: Vec<usize> = (0..50_000).map(|_| rng.gen_range(0..l)).collect();
    let preds: Vec<usize> = (0..50_000).map(|_| rng.gen_range(0..l)).collect();
    let cm = confusion(&preds, &labels, l).unwrap();
    let (_, f, _) = brute_force(&preds, &labels, l);
    assert_eq!(fpr(&cm).unwrap(), f);
    // a random guesser flags a given negative as class c with probability 1/L
    assert!((f - 1.0 / l as f64).abs() < 0.01);
}

#[test]
fn fixture_row_rendering() {
    let k = Kpis { tpr: 0.905, fpr: 0.011, top1: 0.905 };
    assert_eq!(k.render(), "0.905 / 0.011 / 0.905");
}

#[test]
fn report_json_and_csv() {
    let cm = ConfusionMatrix::from_counts(vec![vec![8, 2], vec![4, 6]]).unwrap();
    let r = EvalReport::new(
        rflab_core::sim::Scenario::Ttd,
        "Mbed-ATN",
        10_000,
        rflab_core::dsp::DecimationMode::AntiAliased,
        &cm,
    )
    .unwrap();
    assert_eq!(r.line(), "Mbed-ATN/TTD  0.700 / 0.300 / 0.700");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    r.save(&path).unwrap();
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    for key in ["scenario", "model", "M", "mode", "tpr", "fpr", "top1", "confusion"] {
        assert!(!v[key].is_null(), "missing {key}");
    }
    assert_eq!(v["scenario"], "ttd");
    assert_eq!(v["mode"], "aa");
    let csv = std::fs::read_to_string(dir.path().join("report.confusion.csv")).unwrap();
    assert_eq!(csv, "true\\pred,0,1\n0,8,2\n1,4,6\n");
}

fn toy_example(id: usize, label: usize, rng: &mut ChaCha8Rng) -> Example {
    let m = 2500;
    let data = (0..3 * m)
        .map(|i| {
            let t = (i % m) as f32;
            let base = if label == 0 { (t * 0.05).sin() * 2.0 } else { (t * 0.7).cos() - 0.5 };
            base + rng.gen_range(-0.05..0.05)
        })
        .collect();
    Example {
        id: format!("toy-{id}"),
        label,
        split: Split::Test,
        hop_seed: 0,
        noise_seed: 0,
        features: FeatureTensor { kind: FeatureKind::MagPhasePsd, m, data },
    }
}

#[test]
fn feature_export() {
    let net = MbedAtn::<f32>::new(build_mbed_atn(3, 2500, 0.1, 2, 1).unwrap(), 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let examples: Vec<Example> = (0..20).map(|i| toy_example(i, i % 2, &mut rng)).collect();
    let refs: Vec<&Example> = examples.iter().collect();
    let out = export_features(&net, &refs).unwrap();
    assert_eq!(out.rows.len(), 20);
    assert_eq!(out.width(), net.graph.embed_width());

    let twice = export_features(&net, &[&examples[0], &examples[0]]).unwrap();
    assert_eq!(twice.rows[0], twice.rows[1]);

    let centroid = |c: usize| {
        let rows: Vec<&Vec<f32>> = out.rows.iter().zip(&out.labels).filter(|(_, &l)| l == c).map(|(r, _)| r).collect();
        let mut m = vec![0.0f64; out.width()];
        for r in &rows {
            for (a, &v) in m.iter_mut().zip(r.iter()) {
                *a += v as f64 / rows.len() as f64;
            }
        }
        m
    };
    let dist = |a: &[f64], b: &[f32]| a.iter().zip(b).map(|(x, &y)| (x - y as f64).powi(2)).sum::<f64>().sqrt();
    let (c0, c1) = (centroid(0), centroid(1));
    let between = c0.iter().zip(&c1).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let within = out
        .rows
        .iter()
        .zip(&out.labels)
        .map(|(r, &l)| dist(if l == 0 { &c0 } else { &c1 }, r))
        .sum::<f64>()
        / out.rows.len() as f64;
    assert!(between > within, "between {between} within {within}");

    let csv = out.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 21);
    assert!(lines[0].starts_with("id,label,f0,f1"));
    assert_eq!(lines[1].split(',').count(), 2 + out.width());
}

proptest! {
    #[test]
    fn kpis_stay_in_unit_interval(counts in prop::collection::vec(prop::collection::vec(0u64..50, 4), 4)) {
        let mut counts = counts;
        for (i, row) in counts.iter_mut().enumerate() {
            row[i] += 1;
        }
        let cm = ConfusionMatrix::from_counts(counts).unwrap();
        for v in [tpr(&cm).unwrap(), fpr(&cm).unwrap(), top1(&cm).unwrap()] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        // micro TPR is the trace over the total
        let trace: u64 = (0..4).map(|i| cm.counts[i][i]).sum();
        prop_assert_eq!(tpr(&cm).unwrap(), trace as f64 / cm.total() as f64);
    }
}
