//! Accuracy, F1 (fake is the positive class) and edge homophily.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Label;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            return 0.0;
        }
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Binary F1 of the fake class; 0 when precision + recall is 0.
    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub f1: f64,
    pub confusion: Confusion,
    /// `None` when the graph has no positive weight.
    pub homophily_original: Option<f64>,
    pub homophily_reweighted: Option<f64>,
}

pub fn classification_metrics(pred: &[Label], truth: &[Label]) -> Result<Confusion> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    let mut c = Confusion::default();
    for (&p, &t) in pred.iter().zip(truth) {
        match (p.is_fake(), t.is_fake()) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Share of total edge weight carried by edges whose endpoints agree.
///
/// Returns `Ok(None)` when every weight is zero (the ratio is undefined).
pub fn homophily_ratio(
    edges: &[(usize, usize)],
    weights: &[f64],
    labels: &[Option<Label>],
) -> Result<Option<f64>> {
    if edges.is_empty() {
        return Err(Error::Empty("homophily of an edgeless graph".into()));
    }
    if edges.len() != weights.len() {
        return Err(Error::Shape("edge and weight counts differ".into()));
    }
    let (mut clean, mut all) = (0.0, 0.0);
    for (&(i, j), &w) in edges.iter().zip(weights) {
        if !(w >= 0.0) {
            return Err(Error::Shape(format!("negative edge weight {w}")));
        }
        let (Some(a), Some(b)) = (labels[i], labels[j]) else {
            return Err(Error::Unlabeled(format!("endpoint of edge ({i}, {j})")));
        };
        all += w;
        if a == b {
            clean += w;
        }
    }
    Ok((all > 0.0).then(|| clean / all))
}
