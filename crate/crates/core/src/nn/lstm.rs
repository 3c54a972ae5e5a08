//! Bidirectional LSTM encoder with hand-written backpropagation through time.
//!
//! Gate order inside every `4H` block is input, forget, cell, output.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::params::{matvec_acc, matvec_t_acc, outer_acc, ParamLayout};
use crate::embed::SequenceEmbedding;
use crate::error::{Error, Result};

/// How the per-step states become one sequence vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Last forward state followed by the last backward state.
    #[default]
    Final,
    /// Mean over time of the concatenated forward/backward states.
    Mean,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Parameter ranges of one LSTM direction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LstmCell {
    pub input_dim: usize,
    pub hidden: usize,
    pub w_x: Range<usize>,
    pub w_h: Range<usize>,
    pub bias: Range<usize>,
}

impl LstmCell {
    pub fn register(layout: &mut ParamLayout, prefix: &str, input_dim: usize, hidden: usize) -> Self {
        LstmCell {
            input_dim,
            hidden,
            w_x: layout.add(format!("{prefix}.w_x"), &[4 * hidden, input_dim]),
            w_h: layout.add(format!("{prefix}.w_h"), &[4 * hidden, hidden]),
            bias: layout.add(format!("{prefix}.bias"), &[4 * hidden]),
        }
    }
}

/// Cached activations of one direction, in processing order.
#[derive(Clone, Debug, Default)]
pub struct DirectionTrace {
    /// Row index of the input consumed at each step.
    order: Vec<usize>,
    /// Gate activations `[i f g o]`, `4H` per step.
    gates: Vec<f64>,
    /// Cell states, `H` per step.
    cells: Vec<f64>,
    /// tanh of the cell states.
    cells_tanh: Vec<f64>,
    /// Hidden states, `H` per step.
    hiddens: Vec<f64>,
}

impl DirectionTrace {
    fn hidden_at(&self, step: usize, h: usize) -> &[f64] {
        &self.hiddens[step * h..(step + 1) * h]
    }
}

impl LstmCell {
    fn forward(&self, p: &[f64], xs: &SequenceEmbedding, reverse: bool) -> DirectionTrace {
        let h = self.hidden;
        let t_len = xs.len();
        let order: Vec<usize> = if reverse {
            (0..t_len).rev().collect()
        } else {
            (0..t_len).collect()
        };
        let mut tr = DirectionTrace {
            gates: vec![0.0; t_len * 4 * h],
            cells: vec![0.0; t_len * h],
            cells_tanh: vec![0.0; t_len * h],
            hiddens: vec![0.0; t_len * h],
            order,
        };
        let (w_x, w_h, bias) = (&p[self.w_x.clone()], &p[self.w_h.clone()], &p[self.bias.clone()]);
        let zeros = vec![0.0; h];
        let mut z = vec![0.0; 4 * h];
        for step in 0..t_len {
            let x = xs.row(tr.order[step]);
            z.copy_from_slice(bias);
            matvec_acc(w_x, x, &mut z);
            let (h_prev, c_prev) = if step == 0 {
                (&zeros[..], &zeros[..])
            } else {
                (
                    &tr.hiddens[(step - 1) * h..step * h],
                    &tr.cells[(step - 1) * h..step * h],
                )
            };
            matvec_acc(w_h, h_prev, &mut z);
            let mut c_new = vec![0.0; h];
            let gates = &mut tr.gates[step * 4 * h..(step + 1) * 4 * h];
            for j in 0..h {
                let i = sigmoid(z[j]);
                let f = sigmoid(z[h + j]);
                let g = z[2 * h + j].tanh();
                let o = sigmoid(z[3 * h + j]);
                gates[j] = i;
                gates[h + j] = f;
                gates[2 * h + j] = g;
                gates[3 * h + j] = o;
                c_new[j] = f * c_prev[j] + i * g;
            }
            for j in 0..h {
                let tc = c_new[j].tanh();
                tr.cells_tanh[step * h + j] = tc;
                tr.hiddens[step * h + j] = gates[3 * h + j] * tc;
            }
            tr.cells[step * h..(step + 1) * h].copy_from_slice(&c_new);
        }
        tr
    }

    /// Backpropagates `d_hidden` (`H` per step, processing order) through the
    /// trace, accumulating parameter gradients and input-row gradients.
    fn backward(
        &self,
        p: &[f64],
        xs: &SequenceEmbedding,
        tr: &DirectionTrace,
        d_hidden: &[f64],
        grads: &mut [f64],
        d_rows: &mut [f64],
    ) {
        let h = self.hidden;
        let d = self.input_dim;
        let t_len = tr.order.len();
        let (w_x, w_h) = (&p[self.w_x.clone()], &p[self.w_h.clone()]);
        let zeros = vec![0.0; h];
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut dz = vec![0.0; 4 * h];
        let mut g_wx = vec![0.0; 4 * h * d];
        let mut g_wh = vec![0.0; 4 * h * h];
        let mut g_b = vec![0.0; 4 * h];

        for step in (0..t_len).rev() {
            let gates = &tr.gates[step * 4 * h..(step + 1) * 4 * h];
            let c_tanh = &tr.cells_tanh[step * h..(step + 1) * h];
            let c_prev = if step == 0 {
                &zeros[..]
            } else {
                &tr.cells[(step - 1) * h..step * h]
            };
            let h_prev = if step == 0 { &zeros[..] } else { tr.hidden_at(step - 1, h) };
            for j in 0..h {
                let (i, f, g, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                let dh = d_hidden[step * h + j] + dh_next[j];
                let dc = dc_next[j] + dh * o * (1.0 - c_tanh[j] * c_tanh[j]);
                dz[j] = dc * g * i * (1.0 - i);
                dz[h + j] = dc * c_prev[j] * f * (1.0 - f);
                dz[2 * h + j] = dc * i * (1.0 - g * g);
                dz[3 * h + j] = dh * c_tanh[j] * o * (1.0 - o);
                dc_next[j] = dc * f;
            }
            let row = tr.order[step];
            outer_acc(&mut g_wx, &dz, xs.row(row));
            outer_acc(&mut g_wh, &dz, h_prev);
            for (gb, v) in g_b.iter_mut().zip(&dz) {
                *gb += v;
            }
            matvec_t_acc(w_x, &dz, &mut d_rows[row * d..(row + 1) * d]);
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            matvec_t_acc(w_h, &dz, &mut dh_next);
        }
        for (dst, src) in [(self.w_x.clone(), g_wx), (self.w_h.clone(), g_wh), (self.bias.clone(), g_b)] {
            for (g, v) in grads[dst].iter_mut().zip(src) {
                *g += v;
            }
        }
    }
}

/// Forward and backward LSTMs sharing one input sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BiLstm {
    pub forward: LstmCell,
    pub backward: LstmCell,
    pub pooling: Pooling,
}

/// Everything needed to backpropagate one encoding.
#[derive(Clone, Debug, Default)]
pub struct BiLstmTrace {
    fwd: DirectionTrace,
    bwd: DirectionTrace,
}

impl BiLstm {
    pub fn register(layout: &mut ParamLayout, input_dim: usize, hidden: usize, pooling: Pooling) -> Self {
        BiLstm {
            forward: LstmCell::register(layout, "lstm.fwd", input_dim, hidden),
            backward: LstmCell::register(layout, "lstm.bwd", input_dim, hidden),
            pooling,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.forward.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.forward.hidden
    }

    pub fn output_dim(&self) -> usize {
        2 * self.hidden()
    }

    /// Encodes a sequence into a `2H` vector; the empty sequence encodes to
    /// zeros.
    pub fn encode(&self, p: &[f64], xs: &SequenceEmbedding) -> Result<(Vec<f64>, BiLstmTrace)> {
        if xs.dim() != self.input_dim() {
            return Err(Error::Dimension {
                what: "BiLSTM input",
                expected: self.input_dim(),
                got: xs.dim(),
            });
        }
        let h = self.hidden();
        let mut out = vec![0.0; 2 * h];
        let t_len = xs.len();
        if t_len == 0 {
            return Ok((out, BiLstmTrace::default()));
        }
        let fwd = self.forward.forward(p, xs, false);
        let bwd = self.backward.forward(p, xs, true);
        match self.pooling {
            Pooling::Final => {
                out[..h].copy_from_slice(fwd.hidden_at(t_len - 1, h));
                out[h..].copy_from_slice(bwd.hidden_at(t_len - 1, h));
            }
            Pooling::Mean => {
                let scale = 1.0 / t_len as f64;
                for step in 0..t_len {
                    for j in 0..h {
                        out[j] += fwd.hidden_at(step, h)[j] * scale;
                        out[h + j] += bwd.hidden_at(step, h)[j] * scale;
                    }
                }
            }
        }
        Ok((out, BiLstmTrace { fwd, bwd }))
    }

    /// Accumulates parameter gradients for `d_out` into `grads` and returns
    /// the gradient with respect to every input row (flat, row-major).
    pub fn backward(
        &self,
        p: &[f64],
        xs: &SequenceEmbedding,
        trace: &BiLstmTrace,
        d_out: &[f64],
        grads: &mut [f64],
    ) -> Vec<f64> {
        let h = self.hidden();
        let t_len = xs.len();
        let mut d_rows = vec![0.0; t_len * xs.dim()];
        if t_len == 0 {
            return d_rows;
        }
        let mut dh_f = vec![0.0; t_len * h];
        let mut dh_b = vec![0.0; t_len * h];
        match self.pooling {
            Pooling::Final => {
                dh_f[(t_len - 1) * h..].copy_from_slice(&d_out[..h]);
                dh_b[(t_len - 1) * h..].copy_from_slice(&d_out[h..]);
            }
            Pooling::Mean => {
                let scale = 1.0 / t_len as f64;
                for step in 0..t_len {
                    for j in 0..h {
                        dh_f[step * h + j] = d_out[j] * scale;
                        dh_b[step * h + j] = d_out[h + j] * scale;
                    }
                }
            }
        }
        self.forward.backward(p, xs, &trace.fwd, &dh_f, grads, &mut d_rows);
        self.backward.backward(p, xs, &trace.bwd, &dh_b, grads, &mut d_rows);
        d_rows
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(input: usize, hidden: usize, pooling: Pooling) -> (BiLstm, Vec<f64>) {
        let mut layout = ParamLayout::default();
        let enc = BiLstm::register(&mut layout, input, hidden, pooling);
        let params = (0..layout.len()).map(|i| ((i * 7919) % 97) as f64 / 97.0 - 0.5).collect();
        (enc, params)
    }

    fn rows(t: usize, d: usize) -> SequenceEmbedding {
        let data: Vec<Vec<f64>> = (0..t)
            .map(|i| (0..d).map(|j| ((i * d + j) as f64 * 0.37).sin()).collect())
            .collect();
        SequenceEmbedding::from_rows(&data, d).unwrap()
    }

    #[test]
    fn output_shape() {
        let (enc, p) = setup(8, 16, Pooling::Final);
        let (out, _) = enc.encode(&p, &rows(5, 8)).unwrap();
        assert_eq!(out.len(), 32);
        assert!(enc.encode(&p, &rows(5, 7)).is_err());
    }

    #[test]
    fn empty_sequence_is_zero() {
        let (enc, p) = setup(8, 16, Pooling::Final);
        let (out, _) = enc.encode(&p, &SequenceEmbedding::new(8)).unwrap();
        assert_eq!(out, vec![0.0; 32]);
    }

    #[test]
    fn zero_parameters_give_zero_output() {
        let (enc, _) = setup(3, 2, Pooling::Final);
        let zeros = vec![0.0; enc.backward.bias.end];
        let (out, _) = enc.encode(&zeros, &rows(1, 3)).unwrap();
        // c = 0.5 * 0 + 0.5 * tanh(0) = 0, h = 0.5 * tanh(0) = 0
        assert_eq!(out, vec![0.0; 4]);
    }

    #[test]
    fn single_step_matches_hand_evaluation() {
        let mut layout = ParamLayout::default();
        let enc = BiLstm::register(&mut layout, 1, 1, Pooling::Final);
        let mut p = vec![0.0; layout.len()];
        // forward direction: only the input-weight on each gate is set
        for (gate, w) in [0.5, -0.25, 1.0, 2.0].into_iter().enumerate() {
            p[enc.forward.w_x.start + gate] = w;
        }
        let xs = SequenceEmbedding::from_rows(&[vec![1.0]], 1).unwrap();
        let (out, _) = enc.encode(&p, &xs).unwrap();
        let c = sigmoid(0.5) * 1.0f64.tanh();
        let h = sigmoid(2.0) * c.tanh();
        assert!((out[0] - h).abs() < 1e-15);
        assert_eq!(out[1], 0.0);
    }

    #[test]
    fn directions_read_opposite_ends() {
        let (enc, p) = setup(2, 3, Pooling::Final);
        let xs = rows(4, 2);
        let (out, _) = enc.encode(&p, &xs).unwrap();
        let reversed = SequenceEmbedding::from_rows(
            &(0..4).rev().map(|i| xs.row(i).to_vec()).collect::<Vec<_>>(),
            2,
        )
        .unwrap();
        // swapping the cells and reversing the input swaps the halves
        let mut swapped = p.clone();
        let (f, b) = (enc.forward.w_x.start..enc.forward.bias.end, enc.backward.w_x.start..enc.backward.bias.end);
        let fvals = p[f.clone()].to_vec();
        swapped[f.clone()].copy_from_slice(&p[b.clone()]);
        swapped[b].copy_from_slice(&fvals);
        let (out2, _) = enc.encode(&swapped, &reversed).unwrap();
        assert_eq!(&out[..3], &out2[3..]);
        assert_eq!(&out[3..], &out2[..3]);
    }
}
