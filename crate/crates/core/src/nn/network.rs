//! Composite pair classifiers over a flat parameter vector, with exact
//! reverse-mode gradients.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lstm::{BiLstm, Pooling};
use super::mlp::Mlp;
use super::ops::Operator;
use super::params::ParamLayout;
use crate::embed::{gse_pool, materialize, RowSource, SequenceEmbedding};
use crate::error::{Error, Result};

/// How the two strains reach the classifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Architecture {
    /// One shared BiLSTM encodes each strain; the vectors are fused by
    /// `operator`.
    Siamese { operator: Operator },
    /// One BiLSTM runs over the reference rows followed by the test rows.
    Joint,
    /// Mean-pooled embeddings of both strains, concatenated.
    Pooled,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub architecture: Architecture,
    pub input_dim: usize,
    pub hidden: usize,
    pub mlp_hidden: usize,
    pub classes: usize,
    pub pooling: Pooling,
    /// Vocabulary size when the embedding table is trained with the model.
    pub trainable_vocab: Option<usize>,
}

/// Table rows feeding one pair.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PairSources {
    pub reference: Vec<RowSource>,
    pub test: Vec<RowSource>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    layout: ParamLayout,
    encoder: Option<BiLstm>,
    mlp: Mlp,
    embedding: Option<Range<usize>>,
}

impl Network {
    pub fn new(spec: NetworkSpec) -> Result<Self> {
        if spec.input_dim == 0 || spec.mlp_hidden == 0 || spec.classes < 2 {
            return Err(Error::Config("network sizes must be positive with at least 2 classes".into()));
        }
        let mut layout = ParamLayout::default();
        let (encoder, mlp_input) = match spec.architecture {
            Architecture::Siamese { operator } => {
                if spec.hidden == 0 {
                    return Err(Error::Config("hidden size must be positive".into()));
                }
                let enc = BiLstm::register(&mut layout, spec.input_dim, spec.hidden, spec.pooling);
                let width = operator.output_dim(enc.output_dim());
                (Some(enc), width)
            }
            Architecture::Joint => {
                if spec.hidden == 0 {
                    return Err(Error::Config("hidden size must be positive".into()));
                }
                let enc = BiLstm::register(&mut layout, spec.input_dim, spec.hidden, spec.pooling);
                let width = enc.output_dim();
                (Some(enc), width)
            }
            Architecture::Pooled => (None, 2 * spec.input_dim),
        };
        let mlp = Mlp::register(&mut layout, mlp_input, spec.mlp_hidden, spec.classes);
        let embedding = spec
            .trainable_vocab
            .map(|vocab| layout.add("embedding", &[vocab, spec.input_dim]));
        Ok(Network {
            spec,
            layout,
            encoder,
            mlp,
            embedding,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn num_params(&self) -> usize {
        self.layout.len()
    }

    pub fn encoder(&self) -> Option<&BiLstm> {
        self.encoder.as_ref()
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    /// Seeded initial parameters. Recurrent and hidden weights are uniform in
    /// `±1/sqrt(fan)`; the output layer starts at zero so an untrained model
    /// predicts the uniform distribution. A trainable embedding starts as a
    /// copy of `table`.
    pub fn init_params(&self, seed: u64, table: &[f64]) -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = vec![0.0; self.layout.len()];
        let mut fill = |range: Range<usize>, bound: f64, rng: &mut ChaCha8Rng| {
            for v in &mut p[range] {
                *v = rng.random_range(-bound..bound);
            }
        };
        if let Some(enc) = &self.encoder {
            let bound = 1.0 / (enc.hidden() as f64).sqrt();
            for cell in [&enc.forward, &enc.backward] {
                fill(cell.w_x.clone(), bound, &mut rng);
                fill(cell.w_h.clone(), bound, &mut rng);
                fill(cell.bias.clone(), bound, &mut rng);
            }
        }
        let bound = 1.0 / (self.mlp.input as f64).sqrt();
        fill(self.mlp.w1.clone(), bound, &mut rng);
        fill(self.mlp.b1.clone(), bound, &mut rng);
        if let Some(range) = &self.embedding {
            if table.len() != range.len() {
                return Err(Error::Dimension {
                    what: "trainable embedding table",
                    expected: range.len(),
                    got: table.len(),
                });
            }
            p[range.clone()].copy_from_slice(table);
        }
        Ok(p)
    }

    fn rows(&self, params: &[f64], table: &[f64], sources: &[RowSource]) -> SequenceEmbedding {
        let vectors = match &self.embedding {
            Some(range) => &params[range.clone()],
            None => table,
        };
        materialize(sources, vectors, self.spec.input_dim)
    }

    fn scatter_rows(&self, sources: &[RowSource], d_rows: &[f64], grads: &mut [f64]) {
        let Some(range) = &self.embedding else { return };
        let dim = self.spec.input_dim;
        let g = &mut grads[range.clone()];
        for (src, d) in sources.iter().zip(d_rows.chunks_exact(dim)) {
            for &(id, w) in src {
                for (gi, di) in g[id * dim..(id + 1) * dim].iter_mut().zip(d) {
                    *gi += w * di;
                }
            }
        }
    }

    /// Class probabilities for one pair.
    pub fn predict(&self, params: &[f64], table: &[f64], pair: &PairSources) -> Result<Vec<f64>> {
        let pass = self.forward_pass(params, table, pair)?;
        Ok(pass.probs)
    }

    fn forward_pass(&self, params: &[f64], table: &[f64], pair: &PairSources) -> Result<ForwardPass> {
        if params.len() != self.layout.len() {
            return Err(Error::Dimension {
                what: "parameter vector",
                expected: self.layout.len(),
                got: params.len(),
            });
        }
        let rows_r = self.rows(params, table, &pair.reference);
        let rows_t = self.rows(params, table, &pair.test);
        let encoded = match self.spec.architecture {
            Architecture::Siamese { operator } => {
                let enc = self.encoder.as_ref().expect("siamese network has an encoder");
                let (p, tr_p) = enc.encode(params, &rows_r)?;
                let (r, tr_r) = enc.encode(params, &rows_t)?;
                let q = operator.apply(&p, &r)?;
                Encoded::Siamese { p, r, tr_p, tr_r, q }
            }
            Architecture::Joint => {
                let enc = self.encoder.as_ref().expect("joint network has an encoder");
                let mut joint = rows_r.clone();
                joint.extend(&rows_t)?;
                let (q, tr) = enc.encode(params, &joint)?;
                Encoded::Joint { joint, tr, q }
            }
            Architecture::Pooled => {
                let mut q = gse_pool(&rows_r);
                q.extend(gse_pool(&rows_t));
                Encoded::Pooled { q }
            }
        };
        let (probs, mlp_trace) = self.mlp.forward(params, encoded.q())?;
        Ok(ForwardPass {
            rows_r,
            rows_t,
            encoded,
            probs,
            mlp_trace,
        })
    }

    /// Cross-entropy loss for one labelled pair; gradients are added to
    /// `grads`.
    pub fn loss_and_grad(
        &self,
        params: &[f64],
        table: &[f64],
        pair: &PairSources,
        label: usize,
        grads: &mut [f64],
    ) -> Result<f64> {
        if label >= self.spec.classes {
            return Err(Error::Label {
                label,
                classes: self.spec.classes,
            });
        }
        let pass = self.forward_pass(params, table, pair)?;
        let loss = -pass.probs[label].max(f64::MIN_POSITIVE).ln();
        let mut d_logits = pass.probs.clone();
        d_logits[label] -= 1.0;
        let d_q = self.mlp.backward(params, pass.encoded.q(), &pass.mlp_trace, &d_logits, grads);

        match &pass.encoded {
            Encoded::Siamese { p, r, tr_p, tr_r, .. } => {
                let Architecture::Siamese { operator } = self.spec.architecture else {
                    unreachable!()
                };
                let enc = self.encoder.as_ref().expect("encoder");
                let (d_p, d_r) = operator.backward(p, r, &d_q);
                let d_rows_r = enc.backward(params, &pass.rows_r, tr_p, &d_p, grads);
                let d_rows_t = enc.backward(params, &pass.rows_t, tr_r, &d_r, grads);
                self.scatter_rows(&pair.reference, &d_rows_r, grads);
                self.scatter_rows(&pair.test, &d_rows_t, grads);
            }
            Encoded::Joint { joint, tr, .. } => {
                let enc = self.encoder.as_ref().expect("encoder");
                let d_rows = enc.backward(params, joint, tr, &d_q, grads);
                let split = pass.rows_r.len() * self.spec.input_dim;
                self.scatter_rows(&pair.reference, &d_rows[..split], grads);
                self.scatter_rows(&pair.test, &d_rows[split..], grads);
            }
            Encoded::Pooled { .. } => {
                let dim = self.spec.input_dim;
                for (rows, sources, d_pool) in [
                    (&pass.rows_r, &pair.reference, &d_q[..dim]),
                    (&pass.rows_t, &pair.test, &d_q[dim..]),
                ] {
                    if rows.is_empty() {
                        continue;
                    }
                    let scale = 1.0 / rows.len() as f64;
                    let d_rows: Vec<f64> = (0..rows.len())
                        .flat_map(|_| d_pool.iter().map(move |v| v * scale))
                        .collect();
                    self.scatter_rows(sources, &d_rows, grads);
                }
            }
        }
        Ok(loss)
    }

    /// Summed loss and summed gradients over a batch. Examples are processed
    /// in parallel and reduced in batch order, so the result is bit-identical
    /// regardless of thread count.
    pub fn batch_loss_and_grad(
        &self,
        params: &[f64],
        table: &[f64],
        batch: &[(&PairSources, usize)],
    ) -> Result<(f64, Vec<f64>)> {
        let per_example: Vec<(f64, Vec<f64>)> = batch
            .par_iter()
            .map(|(pair, label)| {
                let mut g = vec![0.0; self.layout.len()];
                let loss = self.loss_and_grad(params, table, pair, *label, &mut g)?;
                Ok((loss, g))
            })
            .collect::<Result<_>>()?;
        let mut total = 0.0;
        let mut grads = vec![0.0; self.layout.len()];
        for (loss, g) in per_example {
            total += loss;
            for (a, b) in grads.iter_mut().zip(g) {
                *a += b;
            }
        }
        Ok((total, grads))
    }

    /// Summed batch loss without gradients.
    pub fn batch_loss(&self, params: &[f64], table: &[f64], batch: &[(&PairSources, usize)]) -> Result<f64> {
        let mut total = 0.0;
        for (pair, label) in batch {
            let probs = self.predict(params, table, pair)?;
            total -= probs[*label].max(f64::MIN_POSITIVE).ln();
        }
        Ok(total)
    }
}

enum Encoded {
    Siamese {
        p: Vec<f64>,
        r: Vec<f64>,
        tr_p: super::lstm::BiLstmTrace,
        tr_r: super::lstm::BiLstmTrace,
        q: Vec<f64>,
    },
    Joint {
        joint: SequenceEmbedding,
        tr: super::lstm::BiLstmTrace,
        q: Vec<f64>,
    },
    Pooled {
        q: Vec<f64>,
    },
}

impl Encoded {
    fn q(&self) -> &[f64] {
        match self {
            Encoded::Siamese { q, .. } | Encoded::Joint { q, .. } | Encoded::Pooled { q } => q,
        }
    }
}

struct ForwardPass {
    rows_r: SequenceEmbedding,
    rows_t: SequenceEmbedding,
    encoded: Encoded,
    probs: Vec<f64>,
    mlp_trace: super::mlp::MlpTrace,
}
