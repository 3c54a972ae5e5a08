//! Pair fusion operators, softmax and cross-entropy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the two sequence vectors are fused before classification.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operator {
    /// `[p; p*r; p-r; r]`
    #[default]
    Mii,
    /// `[p; r]`
    Concat,
}

impl Operator {
    /// Output length for inputs of length `n`.
    pub fn output_dim(self, n: usize) -> usize {
        match self {
            Operator::Mii => 4 * n,
            Operator::Concat => 2 * n,
        }
    }

    pub fn apply(self, p: &[f64], r: &[f64]) -> Result<Vec<f64>> {
        match self {
            Operator::Mii => mii(p, r),
            Operator::Concat => {
                check_len(p, r)?;
                Ok([p, r].concat())
            }
        }
    }

    /// Splits `dq` back into gradients for `p` and `r`.
    pub fn backward(self, p: &[f64], r: &[f64], dq: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = p.len();
        match self {
            Operator::Mii => {
                let (d_p, d_prod, d_diff, d_r) = (&dq[..n], &dq[n..2 * n], &dq[2 * n..3 * n], &dq[3 * n..]);
                let gp = (0..n).map(|i| d_p[i] + d_prod[i] * r[i] + d_diff[i]).collect();
                let gr = (0..n).map(|i| d_r[i] + d_prod[i] * p[i] - d_diff[i]).collect();
                (gp, gr)
            }
            Operator::Concat => (dq[..n].to_vec(), dq[n..].to_vec()),
        }
    }
}

impl std::fmt::Display for Operator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Operator::Mii => "mii",
            Operator::Concat => "concat",
        })
    }
}

impl std::str::FromStr for Operator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mii" => Ok(Operator::Mii),
            "concat" => Ok(Operator::Concat),
            other => Err(Error::Config(format!("unknown operator '{other}' (mii|concat)"))),
        }
    }
}

fn check_len(p: &[f64], r: &[f64]) -> Result<()> {
    if p.len() != r.len() {
        return Err(Error::Dimension {
            what: "pair vectors",
            expected: p.len(),
            got: r.len(),
        });
    }
    Ok(())
}

/// Mutual-information inference features `[p; p*r; p-r; r]`.
pub fn mii(p: &[f64], r: &[f64]) -> Result<Vec<f64>> {
    check_len(p, r)?;
    let mut q = Vec::with_capacity(4 * p.len());
    q.extend_from_slice(p);
    q.extend(p.iter().zip(r).map(|(a, b)| a * b));
    q.extend(p.iter().zip(r).map(|(a, b)| a - b));
    q.extend_from_slice(r);
    Ok(q)
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-ln(probs[label])`.
pub fn cross_entropy(probs: &[f64], label: usize) -> Result<f64> {
    let p = probs.get(label).ok_or(Error::Label {
        label,
        classes: probs.len(),
    })?;
    Ok(-p.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mii_example() {
        assert_eq!(
            mii(&[1.0, 2.0], &[3.0, 4.0]).unwrap(),
            [1.0, 2.0, 3.0, 8.0, -2.0, -2.0, 3.0, 4.0]
        );
        let p = [0.3, -1.0, 2.0];
        let q = mii(&p, &p).unwrap();
        assert_eq!(&q[6..9], [0.0; 3]);
        assert_eq!(mii(&[0.0; 5], &[1.0; 5]).unwrap().len(), 20);
        assert!(mii(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn softmax_and_loss() {
        assert_eq!(softmax(&[0.0, 0.0]), [0.5, 0.5]);
        assert_eq!(softmax(&[0.0; 4]), [0.25; 4]);
        assert!((cross_entropy(&[0.5, 0.5], 0).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(cross_entropy(&[1.0 - 1e-12, 1e-12], 0).unwrap() < 1e-11);
        assert!((cross_entropy(&[0.25; 4], 3).unwrap() - 4f64.ln()).abs() < 1e-12);
        assert!(matches!(cross_entropy(&[0.5, 0.5], 2), Err(Error::Label { label: 2, classes: 2 })));
    }

    proptest! {
        #[test]
        fn mii_swap_structure(v in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..10)) {
            let (p, r): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            let n = p.len();
            let a = mii(&p, &r).unwrap();
            let b = mii(&r, &p).unwrap();
            prop_assert_eq!(&a[..n], &b[3 * n..]);
            prop_assert_eq!(&a[3 * n..], &b[..n]);
            prop_assert_eq!(&a[n..2 * n], &b[n..2 * n]);
            for i in 0..n {
                prop_assert_eq!(a[2 * n + i], -b[2 * n + i]);
            }
        }

        #[test]
        fn softmax_normalized(logits in proptest::collection::vec(-50.0f64..50.0, 2..6)) {
            let p = softmax(&logits);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            prop_assert!(p.iter().all(|&x| x > 0.0));
        }
    }
}
