use radview_core::metrics::{
    collapsed_accuracy, laterality_error_fraction, roc_auc_macro_ovr, top1_accuracy, ConfusionMatrix,
    MetricsReport,
};
use radview_core::rng::{derive_seed, rng_from_seed};
use rand::Rng;

fn brute_force_macro_auc(scores: &[Vec<f64>], labels: &[usize], classes: usize) -> Option<f64> {
    let mut aucs = Vec::new();
    for c in 0..classes {
        let pos: Vec<f64> = labels.iter().zip(scores).filter(|(l, _)| **l == c).map(|(_, s)| s[c]).collect();
        let neg: Vec<f64> = labels.iter().zip(scores).filter(|(l, _)| **l != c).map(|(_, s)| s[c]).collect();
        if pos.is_empty() || neg.is_empty() {
            continue;
        }
        let mut credit = 0.0;
        for p in &pos {
            for n in &neg {
                credit += if p > n {
                    1.0
                } else if p == n {
                    0.5
                } else {
                    0.0
                };
            }
        }
        aucs.push(credit / (pos.len() * neg.len()) as f64);
    }
    (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64)
}

#[test]
fn macro_auc_matches_pair_counting_on_50_cases() {
    for case in 0..50u64 {
        let mut rng = rng_from_seed(derive_seed(9, case, 0));
        let classes = rng.random_range(2..=6);
        let n = rng.random_range(4..=30);
        let levels = rng.random_range(2..=8);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
        let scores: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..classes).map(|_| rng.random_range(0..levels) as f64 / levels as f64).collect())
            .collect();
        let expected = brute_force_macro_auc(&scores, &labels, classes);
        match roc_auc_macro_ovr(&scores, &labels) {
            Ok(report) => {
                let want = expected.expect("library found scorable classes");
                assert!((report.macro_auc - want).abs() <= 1e-12, "case {case}: {} vs {want}", report.macro_auc);
            }
            Err(_) => assert!(expected.is_none(), "case {case}"),
        }
    }
}

/// Truth L view 0: 8 right, 2 called R view 0.
/// Truth R view 1: 5 right, 1 called L view 1, 4 called L view 3.
fn toy() -> ConfusionMatrix {
    let mut cm = ConfusionMatrix::new(48);
    for _ in 0..8 {
        cm.record(0, 0).unwrap();
    }
    for _ in 0..2 {
        cm.record(0, 24).unwrap();
    }
    for _ in 0..5 {
        cm.record(25, 25).unwrap();
    }
    cm.record(25, 1).unwrap();
    for _ in 0..4 {
        cm.record(25, 3).unwrap();
    }
    cm
}

#[test]
fn collapsed_and_laterality_on_toy_matrix() {
    let cm = toy();
    assert_eq!(cm.total(), 20);
    assert_eq!(cm.trace(), 13);
    assert_eq!(collapsed_accuracy(&cm).unwrap(), 16.0 / 20.0);
    assert_eq!(laterality_error_fraction(&cm).unwrap(), Some(3.0 / 7.0));
}

#[test]
fn all_errors_mirrored() {
    let mut cm = ConfusionMatrix::new(48);
    for c in 0..48 {
        cm.record(c, (c + 24) % 48).unwrap();
    }
    assert_eq!(collapsed_accuracy(&cm).unwrap(), 1.0);
    assert_eq!(laterality_error_fraction(&cm).unwrap(), Some(1.0));
}

#[test]
fn perfect_matrix_has_undefined_laterality_fraction() {
    let mut cm = ConfusionMatrix::new(48);
    for c in 0..48 {
        cm.record(c, c).unwrap();
    }
    assert_eq!(collapsed_accuracy(&cm).unwrap(), 1.0);
    assert_eq!(laterality_error_fraction(&cm).unwrap(), None);
}

#[test]
fn report_agrees_with_parts() {
    let labels: Vec<usize> = (0..96).map(|i| i % 48).collect();
    let preds: Vec<usize> = labels.iter().map(|&l| if l % 3 == 0 { (l + 24) % 48 } else { l }).collect();
    let scores: Vec<Vec<f64>> = preds
        .iter()
        .map(|&p| (0..48).map(|c| if c == p { 0.9 } else { 0.1 / 47.0 }).collect())
        .collect();
    let r = MetricsReport::compute(&preds, &scores, &labels).unwrap();
    assert_eq!(r.samples, 96);
    assert_eq!(r.top1_accuracy, top1_accuracy(&preds, &labels).unwrap());
    assert_eq!(r.collapsed_accuracy, 1.0);
    assert_eq!(r.laterality_error_fraction, Some(1.0));
    assert!(r.top1_accuracy < r.collapsed_accuracy);
}
