//! Confusion matrices and support-weighted classification metrics.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are actual classes, columns predicted classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<usize>,
}

impl ConfusionMatrix {
    pub fn zeros(classes: usize) -> Self {
        ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_rows(rows: &[Vec<usize>]) -> Result<Self> {
        let classes = rows.len();
        if rows.iter().any(|r| r.len() != classes) {
            return Err(Error::Format("confusion matrix must be square".into()));
        }
        Ok(ConfusionMatrix {
            classes,
            counts: rows.concat(),
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, actual: usize, predicted: usize) -> usize {
        self.counts[actual * self.classes + predicted]
    }

    pub fn add(&mut self, actual: usize, predicted: usize) {
        self.counts[actual * self.classes + predicted] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Counts in row-major order.
    pub fn row_major(&self) -> &[usize] {
        &self.counts
    }

    pub fn rows(&self) -> Vec<Vec<usize>> {
        self.counts.chunks(self.classes).map(<[usize]>::to_vec).collect()
    }

    pub fn support(&self, class: usize) -> usize {
        (0..self.classes).map(|p| self.get(class, p)).sum()
    }

    pub fn predicted(&self, class: usize) -> usize {
        (0..self.classes).map(|a| self.get(a, class)).sum()
    }

    /// CSV with a header row of predicted classes and one row per actual class.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("actual\\predicted");
        for c in 0..self.classes {
            let _ = write!(out, ",{c}");
        }
        out.push('\n');
        for a in 0..self.classes {
            let _ = write!(out, "{a}");
            for p in 0..self.classes {
                let _ = write!(out, ",{}", self.get(a, p));
            }
            out.push('\n');
        }
        out
    }
}

pub fn confusion(preds: &[usize], labels: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    if preds.len() != labels.len() {
        return Err(Error::Dimension {
            what: "predictions vs labels",
            expected: labels.len(),
            got: preds.len(),
        });
    }
    let mut m = ConfusionMatrix::zeros(classes);
    for (&p, &a) in preds.iter().zip(labels) {
        for c in [p, a] {
            if c >= classes {
                return Err(Error::Label { label: c, classes });
            }
        }
        m.add(a, p);
    }
    Ok(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Accuracy plus precision, recall and F1 averaged over classes with the
/// actual-class supports as weights. Undefined per-class ratios count as 0.
pub fn weighted_metrics(m: &ConfusionMatrix) -> Result<Metrics> {
    let total = m.total();
    if total == 0 {
        return Err(Error::Empty("confusion matrix has no entries"));
    }
    let total = total as f64;
    let mut out = Metrics {
        accuracy: 0.0,
        weighted_precision: 0.0,
        weighted_recall: 0.0,
        weighted_f1: 0.0,
    };
    for c in 0..m.classes() {
        let tp = m.get(c, c) as f64;
        let support = m.support(c) as f64;
        let precision = ratio(tp, m.predicted(c) as f64);
        let recall = ratio(tp, support);
        let f1 = ratio(2.0 * precision * recall, precision + recall);
        let w = support / total;
        out.accuracy += tp;
        out.weighted_precision += w * precision;
        out.weighted_recall += w * recall;
        out.weighted_f1 += w * f1;
    }
    out.accuracy /= total;
    Ok(out)
}

/// Index of the largest probability; the first wins on ties.
pub fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > probs[best] {
            best = i;
        }
    }
    best
}

/// Serializable evaluation result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: String,
    pub model_kind: String,
    pub classes: usize,
    pub confusion: Vec<usize>,
    pub accuracy: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
}

impl MetricsReport {
    pub fn new(task: impl Into<String>, model_kind: impl Into<String>, m: &ConfusionMatrix) -> Result<Self> {
        let metrics = weighted_metrics(m)?;
        Ok(MetricsReport {
            task: task.into(),
            model_kind: model_kind.into(),
            classes: m.classes(),
            confusion: m.row_major().to_vec(),
            accuracy: metrics.accuracy,
            weighted_precision: metrics.weighted_precision,
            weighted_recall: metrics.weighted_recall,
            weighted_f1: metrics.weighted_f1,
        })
    }
}
