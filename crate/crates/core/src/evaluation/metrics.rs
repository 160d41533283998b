use serde::{Deserialize, Serialize};

use super::ReportError;

/// Binary confusion counts with class 1 as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// F1 of one class: 2PR / (P + R), 0 when P + R = 0.
    pub fn class_f1(&self, class: u8) -> f64 {
        let (tp, fp, fn_) = if class == 1 {
            (self.tp, self.fp, self.fn_)
        } else {
            (self.tn, self.fn_, self.fp)
        };
        let denom = 2 * tp + fp + fn_;
        if tp == 0 || denom == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        }
    }

    pub fn support(&self, class: u8) -> usize {
        if class == 1 {
            self.tp + self.fn_
        } else {
            self.tn + self.fp
        }
    }
}

fn check(y_true: &[u8], y_pred: &[u8]) -> Result<(), ReportError> {
    if y_true.len() != y_pred.len() {
        return Err(ReportError::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if let Some(&v) = y_true.iter().chain(y_pred).find(|&&v| v > 1) {
        return Err(ReportError::BadLabel(v));
    }
    Ok(())
}

pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionMatrix, ReportError> {
    check(y_true, y_pred)?;
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (1, 1) => cm.tp += 1,
            (0, 1) => cm.fp += 1,
            (0, 0) => cm.tn += 1,
            _ => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

/// `(tp + tn) / total`; 0 for an empty matrix.
pub fn accuracy(cm: &ConfusionMatrix) -> f64 {
    match cm.total() {
        0 => 0.0,
        total => (cm.tp + cm.tn) as f64 / total as f64,
    }
}

/// Support-weighted mean of the per-class F1 scores.
pub fn weighted_f1_from(cm: &ConfusionMatrix) -> f64 {
    let total = cm.total();
    if total == 0 {
        return 0.0;
    }
    [0u8, 1]
        .iter()
        .map(|&c| cm.support(c) as f64 / total as f64 * cm.class_f1(c))
        .sum()
}

pub fn weighted_f1(y_true: &[u8], y_pred: &[u8]) -> Result<f64, ReportError> {
    Ok(weighted_f1_from(&confusion(y_true, y_pred)?))
}

/// F1 of the positive (buggy) class alone.
pub fn binary_f1(y_true: &[u8], y_pred: &[u8]) -> Result<f64, ReportError> {
    Ok(confusion(y_true, y_pred)?.class_f1(1))
}
