//! Confusion matrices and per-class rates.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Rows are true classes, columns predicted classes.
    pub confusion: Vec<Vec<u64>>,
    pub sensitivity: Vec<f64>,
    pub specificity: Vec<f64>,
    pub accuracy: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    /// Sensitivity `TP / (TP + FN)` and specificity `TN / (TN + FP)` per
    /// class; an empty denominator gives 0.
    pub fn from_confusion(confusion: Vec<Vec<u64>>) -> Result<Self> {
        let k = confusion.len();
        if k == 0 || confusion.iter().any(|r| r.len() != k) {
            return Err(Error::Validation(
                "confusion matrix must be square and non-empty".into(),
            ));
        }
        let total: u64 = confusion.iter().flatten().sum();
        let mut sensitivity = Vec::with_capacity(k);
        let mut specificity = Vec::with_capacity(k);
        for c in 0..k {
            let tp = confusion[c][c];
            let actual: u64 = confusion[c].iter().sum();
            let predicted: u64 = confusion.iter().map(|r| r[c]).sum();
            let fp = predicted - tp;
            let tn = total - actual - fp;
            sensitivity.push(ratio(tp, actual));
            specificity.push(ratio(tn, tn + fp));
        }
        let trace: u64 = (0..k).map(|c| confusion[c][c]).sum();
        Ok(Metrics {
            accuracy: ratio(trace, total),
            confusion,
            sensitivity,
            specificity,
        })
    }
}

/// Metrics for class-index labels.
pub fn compute_metrics(
    truth: &[usize],
    predicted: &[usize],
    class_names: &[String],
) -> Result<Metrics> {
    if truth.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: predicted.len(),
        });
    }
    let k = class_names.len();
    let mut confusion = vec![vec![0u64; k]; k];
    for (&t, &p) in truth.iter().zip(predicted) {
        if t >= k || p >= k {
            return Err(Error::Label(format!(
                "class index {} outside {} classes",
                t.max(p),
                k
            )));
        }
        confusion[t][p] += 1;
    }
    Metrics::from_confusion(confusion)
}

/// Metrics for string labels; every label must appear in `class_names`.
pub fn compute_metrics_named<S: AsRef<str>>(
    truth: &[S],
    predicted: &[S],
    class_names: &[String],
) -> Result<Metrics> {
    let index: HashMap<&str, usize> = class_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let lookup = |labels: &[S]| -> Result<Vec<usize>> {
        labels
            .iter()
            .map(|l| {
                index
                    .get(l.as_ref())
                    .copied()
                    .ok_or_else(|| Error::Label(format!("unknown class {:?}", l.as_ref())))
            })
            .collect()
    };
    compute_metrics(&lookup(truth)?, &lookup(predicted)?, class_names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names() -> Vec<String> {
        ["Benign", "InSitu", "Invasive", "Normal"]
            .map(String::from)
            .to_vec()
    }

    #[test]
    fn perfect_predictions() {
        let y = vec![0, 1, 2, 3, 3, 2];
        let m = compute_metrics(&y, &y, &names()).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert!(m
            .sensitivity
            .iter()
            .chain(&m.specificity)
            .all(|&v| v == 1.0));
        assert_eq!(m.confusion[3][3], 2);
    }

    #[test]
    fn hand_counted_two_class() {
        let m = compute_metrics(&[0, 0, 0, 1, 1], &[0, 1, 0, 1, 0], &names()[..2]).unwrap();
        assert_eq!(m.confusion, vec![vec![2, 1], vec![1, 1]]);
        assert_eq!(m.sensitivity, vec![2.0 / 3.0, 0.5]);
        assert_eq!(m.specificity, vec![0.5, 2.0 / 3.0]);
        assert_eq!(m.accuracy, 0.6);
    }

    #[test]
    fn errors() {
        assert!(compute_metrics(&[0, 1], &[0], &names()).is_err());
        assert!(matches!(
            compute_metrics(&[0, 4], &[0, 1], &names()),
            Err(Error::Label(_))
        ));
        assert!(matches!(
            compute_metrics_named(&["Benign", "Cyst"], &["Benign", "Benign"], &names()),
            Err(Error::Label(_))
        ));
        let m =
            compute_metrics_named(&["Normal", "Benign"], &["Normal", "Normal"], &names()).unwrap();
        assert_eq!(m.confusion[0][3], 1);
    }

    proptest! {
        #[test]
        fn accuracy_is_trace_over_total(pairs in proptest::collection::vec((0usize..4, 0usize..4), 1..60)) {
            let (t, p): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            let m = compute_metrics(&t, &p, &names()).unwrap();
            let total: u64 = m.confusion.iter().flatten().sum();
            let trace: u64 = (0..4).map(|c| m.confusion[c][c]).sum();
            prop_assert_eq!(total as usize, t.len());
            prop_assert_eq!(m.accuracy, trace as f64 / total as f64);
            for v in m.sensitivity.iter().chain(&m.specificity) {
                prop_assert!((0.0..=1.0).contains(v));
            }
        }
    }
}
