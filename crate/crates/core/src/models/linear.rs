//! Logistic regression and perceptron over a single scalar feature.

use serde::{Deserialize, Serialize};

use super::config::Task;
use crate::error::{Error, Result};

/// Iteration cap for logistic gradient descent.
pub const LR_MAX_ITERS: usize = 10_000;
/// Convergence tolerance on the change in mean loss.
pub const LR_TOL: f64 = 1e-9;
/// Step size on the standardized feature.
pub const LR_STEP: f64 = 1.0;
/// Pass cap for perceptron training.
pub const PERCEPTRON_MAX_PASSES: usize = 1000;

/// Affine map `x -> (x - mean) / scale` fitted on the training feature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: f64,
    pub scale: f64,
}

impl Standardizer {
    pub const IDENTITY: Standardizer = Standardizer { mean: 0.0, scale: 1.0 };

    pub fn fit(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Self::IDENTITY;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        Standardizer { mean, scale }
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mean) / self.scale
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// One logistic unit `sigmoid(w * z + b)` on the standardized feature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticUnit {
    pub w: f64,
    pub b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub task: Task,
    pub standardizer: Standardizer,
    /// One unit for binary; one per class (one-vs-rest) for multilevel.
    pub units: Vec<LogisticUnit>,
    /// Set when some unit saw a single label value during fitting.
    pub degenerate: bool,
}

impl LogisticModel {
    /// A binary model with the given raw-scale weight and bias.
    pub fn binary(w: f64, b: f64) -> Self {
        LogisticModel {
            task: Task::Binary,
            standardizer: Standardizer::IDENTITY,
            units: vec![LogisticUnit { w, b }],
            degenerate: false,
        }
    }

    pub fn predict(&self, x: f64) -> Vec<f64> {
        let z = self.standardizer.apply(x);
        match self.task {
            Task::Binary => {
                let p = sigmoid(self.units[0].w * z + self.units[0].b);
                vec![1.0 - p, p]
            }
            Task::Multilevel => {
                let scores: Vec<f64> = self.units.iter().map(|u| sigmoid(u.w * z + u.b)).collect();
                let total: f64 = scores.iter().sum();
                scores.into_iter().map(|s| s / total).collect()
            }
        }
    }
}

/// Fits `(w, b)` by full-batch gradient descent on the mean logistic loss.
fn fit_unit(zs: &[f64], targets: &[f64]) -> LogisticUnit {
    let n = zs.len() as f64;
    let (mut w, mut b) = (0.0, 0.0);
    let mut prev = f64::INFINITY;
    for _ in 0..LR_MAX_ITERS {
        let (mut gw, mut gb, mut loss) = (0.0, 0.0, 0.0);
        for (&z, &y) in zs.iter().zip(targets) {
            let s = w * z + b;
            let p = sigmoid(s);
            // log(1 + e^s) - y s, computed stably
            loss += s.max(0.0) + (-s.abs()).exp().ln_1p() - y * s;
            gw += (p - y) * z;
            gb += p - y;
        }
        loss /= n;
        w -= LR_STEP * gw / n;
        b -= LR_STEP * gb / n;
        if (prev - loss).abs() < LR_TOL {
            break;
        }
        prev = loss;
    }
    LogisticUnit { w, b }
}

pub fn train_logistic(features: &[f64], labels: &[usize], task: Task) -> Result<LogisticModel> {
    check_inputs(features, labels, task)?;
    let standardizer = Standardizer::fit(features);
    let zs: Vec<f64> = features.iter().map(|&x| standardizer.apply(x)).collect();
    let positive_classes: Vec<usize> = match task {
        Task::Binary => vec![1],
        Task::Multilevel => (0..task.classes()).collect(),
    };
    let mut degenerate = false;
    let units = positive_classes
        .into_iter()
        .map(|c| {
            let targets: Vec<f64> = labels.iter().map(|&l| f64::from(u8::from(l == c))).collect();
            if targets.iter().all(|&t| t == targets[0]) {
                degenerate = true;
            }
            fit_unit(&zs, &targets)
        })
        .collect();
    if degenerate {
        log::warn!("logistic regression fitted on a single label value");
    }
    Ok(LogisticModel {
        task,
        standardizer,
        units,
        degenerate,
    })
}

/// `sign(w * z + b)` on the standardized feature; zero maps to class 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerceptronModel {
    pub standardizer: Standardizer,
    pub w: f64,
    pub b: f64,
    pub converged: bool,
    pub passes: usize,
}

impl PerceptronModel {
    pub fn new(w: f64, b: f64) -> Self {
        PerceptronModel {
            standardizer: Standardizer::IDENTITY,
            w,
            b,
            converged: false,
            passes: 0,
        }
    }

    pub fn classify(&self, x: f64) -> usize {
        usize::from(self.w * self.standardizer.apply(x) + self.b >= 0.0)
    }

    pub fn predict(&self, x: f64) -> Vec<f64> {
        match self.classify(x) {
            1 => vec![0.0, 1.0],
            _ => vec![1.0, 0.0],
        }
    }
}

/// Classic perceptron updates until a mistake-free pass or the pass cap.
pub fn train_perceptron(features: &[f64], labels: &[usize], task: Task) -> Result<PerceptronModel> {
    if task != Task::Binary {
        return Err(Error::UnsupportedTask(
            "the perceptron baseline only supports the binary task".into(),
        ));
    }
    check_inputs(features, labels, task)?;
    let standardizer = Standardizer::fit(features);
    let mut model = PerceptronModel {
        standardizer,
        ..PerceptronModel::new(0.0, 0.0)
    };
    for pass in 1..=PERCEPTRON_MAX_PASSES {
        let mut mistakes = 0;
        for (&x, &l) in features.iter().zip(labels) {
            let y = if l == 1 { 1.0 } else { -1.0 };
            let z = standardizer.apply(x);
            if y * (model.w * z + model.b) <= 0.0 {
                model.w += y * z;
                model.b += y;
                mistakes += 1;
            }
        }
        model.passes = pass;
        if mistakes == 0 {
            model.converged = true;
            break;
        }
    }
    Ok(model)
}

fn check_inputs(features: &[f64], labels: &[usize], task: Task) -> Result<()> {
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
    if let Some(&bad) = labels.iter().find(|&&l| l >= task.classes()) {
        return Err(Error::Label {
            label: bad,
            classes: task.classes(),
        });
    }
    Ok(())
}
