//! Classification metrics: accuracy, per-class F1, macro and micro
//! averages, all from a confusion matrix.
//!
//! Conventions: 0/0 ratios (precision, recall, or F1 of a class nobody
//! predicted or held) evaluate to 0, and macro-F1 averages over all `q`
//! declared classes, absent ones included. Micro-F1 pools counts across
//! classes, which for single-label classification is algebraically equal to
//! accuracy; both are still computed separately and reported.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("y_true has {true_len} entries, y_pred has {pred_len}")]
    LengthMismatch { true_len: usize, pred_len: usize },
    #[error("no samples to evaluate")]
    Empty,
    #[error("label {label} out of range for q = {q}")]
    LabelOutOfRange { label: usize, q: usize },
}

/// q x q counts, rows indexed by true class, columns by predicted class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    q: usize,
    counts: Vec<usize>,
}

impl ConfusionMatrix {
    pub fn new(q: usize) -> Self {
        assert!(q >= 1, "need at least one class");
        ConfusionMatrix {
            q,
            counts: vec![0; q * q],
        }
    }

    pub fn from_pairs(
        q: usize,
        y_true: &[usize],
        y_pred: &[usize],
    ) -> Result<Self, MetricsError> {
        if y_true.len() != y_pred.len() {
            return Err(MetricsError::LengthMismatch {
                true_len: y_true.len(),
                pred_len: y_pred.len(),
            });
        }
        if y_true.is_empty() {
            return Err(MetricsError::Empty);
        }
        let mut cm = ConfusionMatrix::new(q);
        for (&t, &p) in y_true.iter().zip(y_pred) {
            for label in [t, p] {
                if label >= q {
                    return Err(MetricsError::LabelOutOfRange { label, q });
                }
            }
            cm.record(t, p);
        }
        Ok(cm)
    }

    pub fn record(&mut self, true_class: usize, pred_class: usize) {
        assert!(true_class < self.q && pred_class < self.q);
        self.counts[true_class * self.q + pred_class] += 1;
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn count(&self, true_class: usize, pred_class: usize) -> usize {
        self.counts[true_class * self.q + pred_class]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let correct: usize = (0..self.q).map(|c| self.count(c, c)).sum();
        correct as f64 / self.total() as f64
    }

    /// Precision, recall, F1 for one class, each 0 when its denominator is.
    pub fn class_prf(&self, c: usize) -> (f64, f64, f64) {
        let tp = self.count(c, c);
        let pred: usize = (0..self.q).map(|t| self.count(t, c)).sum();
        let actual: usize = (0..self.q).map(|p| self.count(c, p)).sum();
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, pred);
        let recall = ratio(tp, actual);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        (precision, recall, f1)
    }

    /// Unweighted mean of per-class F1 over all q declared classes.
    pub fn macro_f1(&self) -> f64 {
        let sum: f64 = (0..self.q).map(|c| self.class_prf(c).2).sum();
        sum / self.q as f64
    }

    /// F1 of the pooled counts. With one label per sample, pooled false
    /// positives equal pooled false negatives, so this equals accuracy.
    pub fn micro_f1(&self) -> f64 {
        let tp: usize = (0..self.q).map(|c| self.count(c, c)).sum();
        let total = self.total();
        let fp = total - tp;
        let fn_ = total - tp;
        let denom = 2 * tp + fp + fn_;
        if denom == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        }
    }
}

/// The reported metric bundle.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Metrics {
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub accuracy: f64,
    pub n_eval: usize,
}

pub fn evaluate(y_true: &[usize], y_pred: &[usize], q: usize) -> Result<Metrics, MetricsError> {
    let cm = ConfusionMatrix::from_pairs(q, y_true, y_pred)?;
    Ok(Metrics {
        macro_f1: cm.macro_f1(),
        micro_f1: cm.micro_f1(),
        accuracy: cm.accuracy(),
        n_eval: y_true.len(),
    })
}
