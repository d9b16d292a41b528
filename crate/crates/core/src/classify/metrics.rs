use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn from_scores(scores: &[f64], labels: &[u8], threshold: f64) -> Self {
        let mut c = Confusion::default();
        for (&s, &y) in scores.iter().zip(labels) {
            match (s >= threshold, y == 1) {
                (true, true) => c.tp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    /// F1 of the positive class: `TP / (TP + (FP + FN)/2)`; 0 when undefined.
    pub fn f1_positive(&self) -> f64 {
        f1(self.tp, self.fp, self.fn_)
    }

    /// Per-class F1 weighted by class support.
    pub fn weighted_f1(&self) -> f64 {
        let pos = (self.tp + self.fn_) as f64;
        let neg = (self.tn + self.fp) as f64;
        let f1_neg = f1(self.tn, self.fn_, self.fp);
        (pos * self.f1_positive() + neg * f1_neg) / (pos + neg)
    }
}

fn f1(tp: u64, fp: u64, fn_: u64) -> f64 {
    let denom = tp as f64 + (fp + fn_) as f64 / 2.0;
    if denom == 0.0 {
        0.0
    } else {
        tp as f64 / denom
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Scores ≥ threshold are called positive; the first point uses +∞.
    pub threshold: f64,
}

/// ROC over every distinct score, tied scores entering together.
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<RocPoint>> {
    let pos = labels.iter().filter(|&&y| y == 1).count() as f64;
    let neg = labels.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0, threshold: f64::INFINITY }];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        points.push(RocPoint { fpr: fp / neg, tpr: tp / pos, threshold: s });
    }
    Ok(points)
}

/// Trapezoidal area under an ROC curve.
pub fn trapezoid_auc(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    roc_curve(scores, labels).map(|r| trapezoid_auc(&r))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub n: usize,
    pub accuracy: f64,
    pub weighted_f1: f64,
    /// `None` when only one class is present.
    pub auc: Option<f64>,
    pub roc: Vec<RocPoint>,
    pub confusion: Confusion,
}

/// Confusion-based metrics at `threshold` plus ROC/AUC when both classes
/// are present.
pub fn metrics(scores: &[f64], labels: &[u8], threshold: f64) -> Result<EvalReport> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension { expected: labels.len(), got: scores.len() });
    }
    if scores.is_empty() {
        return Err(Error::Config("metrics need at least one sample".into()));
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::Schema("labels must be 0 or 1".into()));
    }
    let confusion = Confusion::from_scores(scores, labels, threshold);
    let (auc, roc) = match roc_curve(scores, labels) {
        Ok(roc) => (Some(trapezoid_auc(&roc)), roc),
        Err(Error::SingleClass) => (None, Vec::new()),
        Err(e) => return Err(e),
    };
    Ok(EvalReport {
        n: scores.len(),
        accuracy: confusion.accuracy(),
        weighted_f1: confusion.weighted_f1(),
        auc,
        roc,
        confusion,
    })
}
