use std::ops::Range;

use super::ops::softmax;
use super::params::{matvec_acc, matvec_t_acc, outer_acc, ParamLayout};
use crate::error::{Error, Result};

/// One ReLU hidden layer followed by a linear softmax layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mlp {
    pub input: usize,
    pub hidden: usize,
    pub classes: usize,
    pub w1: Range<usize>,
    pub b1: Range<usize>,
    pub w2: Range<usize>,
    pub b2: Range<usize>,
}

/// Activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct MlpTrace {
    hidden: Vec<f64>,
}

impl Mlp {
    pub fn register(layout: &mut ParamLayout, input: usize, hidden: usize, classes: usize) -> Self {
        Mlp {
            input,
            hidden,
            classes,
            w1: layout.add("mlp.w1", &[hidden, input]),
            b1: layout.add("mlp.b1", &[hidden]),
            w2: layout.add("mlp.w2", &[classes, hidden]),
            b2: layout.add("mlp.b2", &[classes]),
        }
    }

    /// Class probabilities for `q`.
    pub fn forward(&self, p: &[f64], q: &[f64]) -> Result<(Vec<f64>, MlpTrace)> {
        if q.len() != self.input {
            return Err(Error::Dimension {
                what: "classifier input",
                expected: self.input,
                got: q.len(),
            });
        }
        let mut hidden = p[self.b1.clone()].to_vec();
        matvec_acc(&p[self.w1.clone()], q, &mut hidden);
        hidden.iter_mut().for_each(|v| *v = v.max(0.0));
        let mut logits = p[self.b2.clone()].to_vec();
        matvec_acc(&p[self.w2.clone()], &hidden, &mut logits);
        Ok((softmax(&logits), MlpTrace { hidden }))
    }

    /// Given `d_logits`, accumulates parameter gradients and returns `dL/dq`.
    pub fn backward(&self, p: &[f64], q: &[f64], trace: &MlpTrace, d_logits: &[f64], grads: &mut [f64]) -> Vec<f64> {
        outer_acc(&mut grads[self.w2.clone()], d_logits, &trace.hidden);
        for (g, d) in grads[self.b2.clone()].iter_mut().zip(d_logits) {
            *g += d;
        }
        let mut d_hidden = vec![0.0; self.hidden];
        matvec_t_acc(&p[self.w2.clone()], d_logits, &mut d_hidden);
        for (d, h) in d_hidden.iter_mut().zip(&trace.hidden) {
            if *h <= 0.0 {
                *d = 0.0;
            }
        }
        outer_acc(&mut grads[self.w1.clone()], &d_hidden, q);
        for (g, d) in grads[self.b1.clone()].iter_mut().zip(&d_hidden) {
            *g += d;
        }
        let mut d_q = vec![0.0; self.input];
        matvec_t_acc(&p[self.w1.clone()], &d_hidden, &mut d_q);
        d_q
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_are_uniform() {
        for classes in [2, 4] {
            let mut layout = ParamLayout::default();
            let mlp = Mlp::register(&mut layout, 6, 3, classes);
            let p = vec![0.0; layout.len()];
            let (probs, _) = mlp.forward(&p, &[1.0; 6]).unwrap();
            assert_eq!(probs, vec![1.0 / classes as f64; classes]);
            assert!(mlp.forward(&p, &[1.0; 5]).is_err());
        }
    }
}
