//! Confusion-matrix metrics and report emission.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dense::History;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
}

impl ConfusionMatrix {
    pub fn new(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        ConfusionMatrix {
            true_pos: tp,
            false_pos: fp,
            true_neg: tn,
            false_neg: fn_,
        }
    }

    pub fn total(&self) -> usize {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }
}

pub fn confusion(predictions: &[u8], truth: &[u8]) -> Result<ConfusionMatrix> {
    if predictions.len() != truth.len() || predictions.is_empty() {
        return Err(Error::LengthMismatch(predictions.len(), truth.len()));
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &t) in predictions.iter().zip(truth) {
        match (p == 1, t == 1) {
            (true, true) => cm.true_pos += 1,
            (true, false) => cm.false_pos += 1,
            (false, false) => cm.true_neg += 1,
            (false, true) => cm.false_neg += 1,
        }
    }
    Ok(cm)
}

/// Ratios whose denominator is zero are reported as 0 with the matching
/// `*_defined` flag cleared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Metrics<T: Scalar> {
    pub accuracy: T,
    pub precision: T,
    pub recall: T,
    pub f1: T,
    pub precision_defined: bool,
    pub recall_defined: bool,
    pub f1_defined: bool,
}

fn ratio<T: Scalar>(num: usize, den: usize) -> (T, bool) {
    if den == 0 {
        (T::zero(), false)
    } else {
        (T::of_usize(num) / T::of_usize(den), true)
    }
}

pub fn metrics<T: Scalar>(cm: &ConfusionMatrix) -> Metrics<T> {
    let (accuracy, _) = ratio(cm.true_pos + cm.true_neg, cm.total());
    let (precision, precision_defined) = ratio(cm.true_pos, cm.true_pos + cm.false_pos);
    let (recall, recall_defined) = ratio(cm.true_pos, cm.true_pos + cm.false_neg);
    let sum = precision + recall;
    let f1_defined = precision_defined && recall_defined && sum > T::zero();
    let f1 = if f1_defined {
        T::of(2.0) * precision * recall / sum
    } else {
        T::zero()
    };
    Metrics {
        accuracy,
        precision,
        recall,
        f1,
        precision_defined,
        recall_defined,
        f1_defined,
    }
}

pub fn accuracy(predictions: &[u8], truth: &[u8]) -> Result<f64> {
    Ok(metrics::<f64>(&confusion(predictions, truth)?).accuracy)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Forest,
    DenseHead,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitAccuracy {
    pub train: Option<f64>,
    pub val: Option<f64>,
    pub test: Option<f64>,
}

/// Metrics JSON document: per-split accuracy plus precision, recall and F1
/// on the evaluated split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: SplitAccuracy,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub threshold: f64,
    pub model: ModelKind,
}

impl MetricsReport {
    pub fn from_metrics(
        accuracy: SplitAccuracy,
        evaluated: &Metrics<f64>,
        threshold: f64,
        model: ModelKind,
    ) -> Self {
        MetricsReport {
            accuracy,
            precision: evaluated.precision,
            recall: evaluated.recall,
            f1: evaluated.f1,
            threshold,
            model,
        }
    }
}

pub const METRICS_FILE: &str = "metrics.json";
pub const HISTORY_FILE: &str = "history.csv";

/// Writes `metrics.json` and, when given, `history.csv` into `dir`.
pub fn emit_report(
    report: &MetricsReport,
    history: Option<&History>,
    dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let metrics_path = dir.join(METRICS_FILE);
    let mut json = serde_json::to_string_pretty(report).map_err(|e| Error::format("metrics", e))?;
    json.push('\n');
    fs::write(&metrics_path, json).map_err(|e| Error::io(&metrics_path, e))?;
    written.push(metrics_path);
    if let Some(history) = history {
        let path = dir.join(HISTORY_FILE);
        fs::write(&path, history.to_csv()).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::EpochRecord;

    #[test]
    fn confusion_examples() {
        assert_eq!(confusion(&[1, 0], &[1, 1]).unwrap(), ConfusionMatrix::new(1, 0, 0, 1));
        let same = confusion(&[1, 0, 1], &[1, 0, 1]).unwrap();
        assert_eq!((same.false_pos, same.false_neg), (0, 0));
        assert_eq!(confusion(&[1; 5], &[0; 5]).unwrap().false_pos, 5);
        assert!(matches!(confusion(&[1], &[1, 0]), Err(Error::LengthMismatch(1, 2))));
        assert!(confusion(&[], &[]).is_err());
    }

    #[test]
    fn reported_precision_and_recall() {
        let m = metrics::<f64>(&ConfusionMatrix::new(906, 119, 881, 94));
        assert!((m.precision - 0.8839).abs() < 1e-4);
        assert_eq!(m.recall, 0.906);
        assert!((m.f1 - 0.8948).abs() < 1e-4);
    }

    #[test]
    fn perfect_and_degenerate() {
        let m = metrics::<f64>(&ConfusionMatrix::new(4, 0, 6, 0));
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));
        let m = metrics::<f64>(&ConfusionMatrix::new(0, 0, 5, 3));
        assert_eq!(m.precision, 0.0);
        assert!(!m.precision_defined && m.recall_defined && !m.f1_defined);
    }

    #[test]
    fn emission_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        let report = MetricsReport {
            accuracy: SplitAccuracy {
                train: Some(0.9),
                val: Some(0.8),
                test: None,
            },
            precision: 0.5,
            recall: 0.25,
            f1: 1.0 / 3.0,
            threshold: 0.5,
            model: ModelKind::DenseHead,
        };
        let history = History {
            epochs: (1..=10)
                .map(|epoch| EpochRecord {
                    epoch,
                    train_loss: 1.0 / epoch as f64,
                    train_accuracy: 0.5,
                    val_loss: Some(0.7),
                    val_accuracy: Some(0.6),
                })
                .collect(),
        };
        emit_report(&report, Some(&history), dir.path()).unwrap();
        let first_csv = fs::read(dir.path().join(HISTORY_FILE)).unwrap();
        let first_json = fs::read(dir.path().join(METRICS_FILE)).unwrap();
        assert_eq!(String::from_utf8_lossy(&first_csv).lines().count(), 11);
        emit_report(&report, Some(&history), dir.path()).unwrap();
        assert_eq!(fs::read(dir.path().join(HISTORY_FILE)).unwrap(), first_csv);
        assert_eq!(fs::read(dir.path().join(METRICS_FILE)).unwrap(), first_json);
        let parsed: serde_json::Value = serde_json::from_slice(&first_json).unwrap();
        assert_eq!(parsed["model"], "dense_head");
        assert!(parsed["accuracy"]["test"].is_null());
    }

    #[test]
    fn empty_history_is_header_only() {
        assert_eq!(History::default().to_csv(), "epoch,train_loss,train_acc,val_loss,val_acc\n");
    }
}
