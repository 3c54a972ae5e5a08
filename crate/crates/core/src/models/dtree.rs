//! CART classification tree on a single scalar feature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MAX_DEPTH: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        counts: Vec<usize>,
    },
    Split {
        /// Samples with `x <= threshold` go left.
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn leaf(&self, x: f64) -> &[usize] {
        match self {
            TreeNode::Leaf { counts } => counts,
            TreeNode::Split { threshold, left, right } => {
                if x <= *threshold {
                    left.leaf(x)
                } else {
                    right.leaf(x)
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub classes: usize,
    pub max_depth: usize,
    pub root: TreeNode,
}

impl DecisionTree {
    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    /// Class frequencies of the leaf reached by `x`.
    pub fn predict(&self, x: f64) -> Vec<f64> {
        let counts = self.root.leaf(x);
        let total: usize = counts.iter().sum();
        counts.iter().map(|&c| c as f64 / total as f64).collect()
    }
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

/// `samples` must be sorted by feature value.
fn grow(samples: &[(f64, usize)], classes: usize, depth_left: usize) -> TreeNode {
    let n = samples.len();
    let mut counts = vec![0; classes];
    for &(_, l) in samples {
        counts[l] += 1;
    }
    let parent = gini(&counts, n);
    if depth_left == 0 || parent == 0.0 || n < 2 {
        return TreeNode::Leaf { counts };
    }

    let mut left = vec![0; classes];
    let mut best: Option<(f64, usize)> = None;
    for i in 1..n {
        left[samples[i - 1].1] += 1;
        if samples[i - 1].0 == samples[i].0 {
            continue;
        }
        let right: Vec<usize> = counts.iter().zip(&left).map(|(t, l)| t - l).collect();
        let impurity = (i as f64 * gini(&left, i) + (n - i) as f64 * gini(&right, n - i)) / n as f64;
        if best.is_none_or(|(b, _)| impurity < b) {
            best = Some((impurity, i));
        }
    }
    match best {
        Some((impurity, i)) if impurity < parent - 1e-12 => {
            let threshold = (samples[i - 1].0 + samples[i].0) / 2.0;
            TreeNode::Split {
                threshold,
                left: Box::new(grow(&samples[..i], classes, depth_left - 1)),
                right: Box::new(grow(&samples[i..], classes, depth_left - 1)),
            }
        }
        _ => TreeNode::Leaf { counts },
    }
}

/// Grows a Gini-impurity tree of depth at most `max_depth`.
pub fn train_dtree(features: &[f64], labels: &[usize], classes: usize, max_depth: usize) -> Result<DecisionTree> {
    if features.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if features.len() != labels.len() {
        return Err(Error::Dimension {
            what: "features vs labels",
            expected: labels.len(),
            got: features.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Label { label: bad, classes });
    }
    if features.iter().any(|x| !x.is_finite()) {
        return Err(Error::Format("decision tree feature is not finite".into()));
    }
    let mut samples: Vec<(f64, usize)> = features.iter().copied().zip(labels.iter().copied()).collect();
    samples.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(DecisionTree {
        classes,
        max_depth,
        root: grow(&samples, classes, max_depth),
    })
}
