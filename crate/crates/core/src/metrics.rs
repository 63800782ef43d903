//! Classification metrics: top-1 accuracy, confusion analytics, the
//! laterality decomposition and macro one-vs-rest ROC AUC.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::taxonomy::{neutral_of_class, NUM_CLASSES};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("no samples")]
    Empty,
    #[error("{preds} predictions for {labels} labels")]
    LengthMismatch { preds: usize, labels: usize },
    #[error("class index {index} outside 0..{classes}")]
    IndexOutOfRange { index: usize, classes: usize },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("fewer than two classes have both positives and negatives")]
    DegenerateLabels,
    #[error("score row {row} has {got} columns, expected {expected}")]
    BadScores { row: usize, got: usize, expected: usize },
    #[error("class totals differ; buckets need a balanced test set")]
    Unbalanced,
}

pub type Result<T> = core::result::Result<T, MetricsError>;

fn check_lengths(preds: &[usize], labels: &[usize]) -> Result<()> {
    if preds.len() != labels.len() {
        return Err(MetricsError::LengthMismatch {
            preds: preds.len(),
            labels: labels.len(),
        });
    }
    if preds.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

pub fn top1_accuracy(preds: &[usize], labels: &[usize]) -> Result<f64> {
    check_lengths(preds, labels)?;
    let correct = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / preds.len() as f64)
}

/// Square count matrix; rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_predictions(preds: &[usize], labels: &[usize], classes: usize) -> Result<Self> {
        if preds.len() != labels.len() {
            return Err(MetricsError::LengthMismatch {
                preds: preds.len(),
                labels: labels.len(),
            });
        }
        let mut cm = ConfusionMatrix::new(classes);
        for (&p, &t) in preds.iter().zip(labels) {
            cm.record(t, p)?;
        }
        Ok(cm)
    }

    pub fn record(&mut self, truth: usize, pred: usize) -> Result<()> {
        for index in [truth, pred] {
            if index >= self.classes {
                return Err(MetricsError::IndexOutOfRange {
                    index,
                    classes: self.classes,
                });
            }
        }
        self.counts[truth * self.classes + pred] += 1;
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.classes + pred]
    }

    pub fn row(&self, truth: usize) -> &[u64] {
        &self.counts[truth * self.classes..(truth + 1) * self.classes]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|i| self.get(i, i)).sum()
    }

    pub fn row_total(&self, truth: usize) -> u64 {
        self.row(truth).iter().sum()
    }

    fn cells(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .map(move |(i, &n)| (i / self.classes, i % self.classes, n))
    }
}

/// 48-class confusion matrix from predictions.
pub fn confusion(preds: &[usize], labels: &[usize]) -> Result<ConfusionMatrix> {
    ConfusionMatrix::from_predictions(preds, labels, NUM_CLASSES)
}

fn require_48(cm: &ConfusionMatrix) -> Result<()> {
    if cm.classes != NUM_CLASSES {
        return Err(MetricsError::IndexOutOfRange {
            index: cm.classes,
            classes: NUM_CLASSES,
        });
    }
    Ok(())
}

/// Accuracy after merging each left/right class pair into its neutral view.
pub fn collapsed_accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    require_48(cm)?;
    let total = cm.total();
    if total == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    let hits: u64 = cm
        .cells()
        .filter(|&(t, p, _)| neutral_of_class(t) == neutral_of_class(p))
        .map(|(_, _, n)| n)
        .sum();
    Ok(hits as f64 / total as f64)
}

/// Fraction of misclassifications that only get the laterality wrong.
/// `None` when there are no errors.
pub fn laterality_error_fraction(cm: &ConfusionMatrix) -> Result<Option<f64>> {
    require_48(cm)?;
    let (mut errors, mut mirror) = (0u64, 0u64);
    for (t, p, n) in cm.cells() {
        if t != p {
            errors += n;
            if neutral_of_class(t) == neutral_of_class(p) {
                mirror += n;
            }
        }
    }
    Ok((errors > 0).then(|| mirror as f64 / errors as f64))
}

/// Binary ROC AUC by the Mann–Whitney rank statistic with midranks for ties.
/// `None` when either class is absent.
pub fn binary_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j share their mean.
        let mid = (i + 1 + j) as f64 / 2.0;
        rank_sum += mid * order[i..j].iter().filter(|&&k| positive[k]).count() as f64;
        i = j;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AucReport {
    pub macro_auc: f64,
    pub per_class: Vec<Option<f64>>,
    /// Classes without both positives and negatives, left out of the mean.
    pub skipped: Vec<usize>,
}

/// Macro average of one-vs-rest AUCs over the score columns.
pub fn roc_auc_macro_ovr(scores: &[Vec<f64>], labels: &[usize]) -> Result<AucReport> {
    if scores.len() != labels.len() {
        return Err(MetricsError::LengthMismatch {
            preds: scores.len(),
            labels: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(MetricsError::Empty);
    }
    let classes = scores[0].len();
    for (row, s) in scores.iter().enumerate() {
        if s.len() != classes {
            return Err(MetricsError::BadScores {
                row,
                got: s.len(),
                expected: classes,
            });
        }
    }
    if let Some(&index) = labels.iter().find(|&&l| l >= classes) {
        return Err(MetricsError::IndexOutOfRange { index, classes });
    }
    let mut per_class = Vec::with_capacity(classes);
    let mut skipped = Vec::new();
    let mut column = vec![0.0; scores.len()];
    let mut positive = vec![false; scores.len()];
    for c in 0..classes {
        for (i, (s, &l)) in scores.iter().zip(labels).enumerate() {
            column[i] = s[c];
            positive[i] = l == c;
        }
        let auc = binary_auc(&column, &positive);
        if auc.is_none() {
            skipped.push(c);
        }
        per_class.push(auc);
    }
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    if present.len() < 2 {
        return Err(MetricsError::DegenerateLabels);
    }
    Ok(AucReport {
        macro_auc: present.iter().sum::<f64>() / present.len() as f64,
        per_class,
        skipped,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassBuckets {
    pub per_class_correct: Vec<u64>,
    pub high_threshold: u64,
    pub low_threshold: u64,
    /// Classes with at least `high_threshold` correct.
    pub high: Vec<usize>,
    /// Classes with at most `low_threshold` correct.
    pub low: Vec<usize>,
}

/// Splits classes by count of correct predictions: at least 40 of 42 is
/// high, at most 26 of 42 is low. Thresholds scale to `n_per_class` and are
/// rounded to the nearest integer.
pub fn per_class_buckets(cm: &ConfusionMatrix, n_per_class: u64) -> Result<ClassBuckets> {
    if (0..cm.classes).any(|c| cm.row_total(c) != n_per_class) {
        return Err(MetricsError::Unbalanced);
    }
    let scale = |k: u64| libm::round(k as f64 * n_per_class as f64 / 42.0) as u64;
    let (high_threshold, low_threshold) = (scale(40), scale(26));
    let per_class_correct: Vec<u64> = (0..cm.classes).map(|c| cm.get(c, c)).collect();
    let pick = |f: &dyn Fn(u64) -> bool| -> Vec<usize> {
        (0..cm.classes).filter(|&c| f(per_class_correct[c])).collect()
    };
    Ok(ClassBuckets {
        high: pick(&|n| n >= high_threshold),
        low: pick(&|n| n <= low_threshold),
        per_class_correct,
        high_threshold,
        low_threshold,
    })
}

/// Summary of one evaluation run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsReport {
    pub samples: usize,
    pub top1_accuracy: f64,
    pub macro_auc: Option<f64>,
    pub collapsed_accuracy: f64,
    pub laterality_error_fraction: Option<f64>,
    pub per_class_accuracy: Vec<f64>,
    pub buckets: Option<ClassBuckets>,
}

impl MetricsReport {
    /// Builds the report from predictions, probability rows and true labels.
    pub fn compute(preds: &[usize], scores: &[Vec<f64>], labels: &[usize]) -> Result<Self> {
        check_lengths(preds, labels)?;
        let cm = confusion(preds, labels)?;
        let macro_auc = match roc_auc_macro_ovr(scores, labels) {
            Ok(r) => Some(r.macro_auc),
            Err(MetricsError::DegenerateLabels) => None,
            Err(e) => return Err(e),
        };
        let per_class_accuracy = (0..NUM_CLASSES)
            .map(|c| {
                let n = cm.row_total(c);
                if n == 0 {
                    0.0
                } else {
                    cm.get(c, c) as f64 / n as f64
                }
            })
            .collect();
        let n0 = cm.row_total(0);
        let buckets = if n0 > 0 {
            per_class_buckets(&cm, n0).ok()
        } else {
            None
        };
        Ok(MetricsReport {
            samples: preds.len(),
            top1_accuracy: top1_accuracy(preds, labels)?,
            macro_auc,
            collapsed_accuracy: collapsed_accuracy(&cm)?,
            laterality_error_fraction: laterality_error_fraction(&cm)?,
            per_class_accuracy,
            buckets,
        })
    }
}
