use crate::approximator::{log_softmax, Matrix, Mlp};
use crate::demo::Trajectory;
use crate::error::Result;

use super::Encoder;

/// Log-probability tables of one trajectory under a hierarchical policy.
#[derive(Clone, Debug, PartialEq)]
pub struct ViterbiTables {
    pub k: usize,
    /// `log π_H(c | s_0, sentinel, g)`
    pub init: Vec<f64>,
    /// For `t >= 1`: `trans[t-1][c_prev * k + c] = log π_H(c | s_t, c_prev, g)`.
    pub trans: Vec<Vec<f64>>,
    /// `emit[t][c] = log π_L(a_t | s_t, c, g)`
    pub emit: Vec<Vec<f64>>,
}

impl ViterbiTables {
    pub fn len(&self) -> usize {
        self.emit.len()
    }

    pub fn is_empty(&self) -> bool {
        self.emit.is_empty()
    }

    /// Joint log-probability of a label sequence, accumulated in the same
    /// order as the decoder.
    pub fn sequence_logprob(&self, labels: &[usize]) -> f64 {
        let mut acc = self.init[labels[0]] + self.emit[0][labels[0]];
        for t in 1..labels.len() {
            acc = acc + self.trans[t - 1][labels[t - 1] * self.k + labels[t]] + self.emit[t][labels[t]];
        }
        acc
    }

    pub fn from_policy(high: &Mlp, low: &Mlp, enc: &Encoder, traj: &Trajectory) -> Result<Self> {
        let t_len = traj.len();
        let k = enc.k;
        let mut xh = Matrix::zeros(1 + t_len.saturating_sub(1) * k, enc.high_dim());
        enc.high_row(xh.row_mut(0), &traj.states[0], enc.sentinel(), &traj.goal);
        for t in 1..t_len {
            for cp in 0..k {
                enc.high_row(xh.row_mut(1 + (t - 1) * k + cp), &traj.states[t], cp, &traj.goal);
            }
        }
        let mut xl = Matrix::zeros(t_len * k, enc.low_dim());
        for t in 0..t_len {
            for c in 0..k {
                enc.low_row(xl.row_mut(t * k + c), &traj.states[t], c, &traj.goal);
            }
        }
        let zh = high.forward_batch(&xh)?;
        let zl = low.forward_batch(&xl)?;
        let init = log_softmax(zh.row(0));
        let trans = (1..t_len)
            .map(|t| {
                (0..k)
                    .flat_map(|cp| log_softmax(zh.row(1 + (t - 1) * k + cp)))
                    .collect()
            })
            .collect();
        let emit = (0..t_len)
            .map(|t| {
                (0..k)
                    .map(|c| log_softmax(zl.row(t * k + c))[traj.actions[t]])
                    .collect()
            })
            .collect();
        Ok(Self {
            k,
            init,
            trans,
            emit,
        })
    }
}

/// Max-product decoding with back-tracing in `O(T K²)`. Ties resolve toward
/// the lowest option index, both for the final label and for predecessors.
pub fn decode_tables(tables: &ViterbiTables) -> (Vec<usize>, f64) {
    let t_len = tables.len();
    if t_len == 0 {
        return (Vec::new(), 0.0);
    }
    let k = tables.k;
    let mut score: Vec<f64> = (0..k).map(|c| tables.init[c] + tables.emit[0][c]).collect();
    let mut back = vec![vec![0usize; k]; t_len];
    for t in 1..t_len {
        let trans = &tables.trans[t - 1];
        let mut next = vec![0.0; k];
        for c in 0..k {
            let mut best = 0;
            let mut best_val = score[0] + trans[c];
            for cp in 1..k {
                let v = score[cp] + trans[cp * k + c];
                if v > best_val {
                    best = cp;
                    best_val = v;
                }
            }
            back[t][c] = best;
            next[c] = best_val + tables.emit[t][c];
        }
        score = next;
    }
    let mut last = 0;
    for c in 1..k {
        if score[c] > score[last] {
            last = c;
        }
    }
    let best = score[last];
    let mut labels = vec![0; t_len];
    labels[t_len - 1] = last;
    for t in (1..t_len).rev() {
        labels[t - 1] = back[t][labels[t]];
    }
    (labels, best)
}

/// Most likely option sequence of a trajectory under `(π_H', π_L')`.
pub fn viterbi_segment(
    traj: &Trajectory,
    high_target: &Mlp,
    low_target: &Mlp,
    enc: &Encoder,
) -> Result<(Vec<usize>, f64)> {
    let tables = ViterbiTables::from_policy(high_target, low_target, enc, traj)?;
    Ok(decode_tables(&tables))
}
