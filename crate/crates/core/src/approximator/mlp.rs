use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

/// Multilayer perceptron with ReLU hidden layers and an identity output layer.
///
/// All parameters live in one flat buffer. Layer `l` stores its weight matrix
/// as `fan_in x fan_out` row-major, immediately followed by its bias vector.
/// The same type doubles as a gradient container: a gradient is simply an
/// `Mlp` with identical layer sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Activations recorded by [`Mlp::record`], consumed by the backward passes.
///
/// `acts[0]` is the input batch, `acts[l]` the post-activation output of layer
/// `l`. A default tape holds nothing and is rejected by every backward pass.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    acts: Vec<Matrix>,
}

impl Tape {
    pub fn output(&self) -> Option<&Matrix> {
        self.acts.last()
    }

    pub fn input(&self) -> Option<&Matrix> {
        self.acts.first()
    }

    pub fn is_recorded(&self) -> bool {
        !self.acts.is_empty()
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn new(sizes: &[usize], seed: u64) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Config(format!(
                "layer sizes must list at least input and output, all positive: {sizes:?}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(param_count(sizes));
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| rng.gen_range(-limit..=limit)));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
        })
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; param_count(sizes)],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.sizes)
    }

    /// Builds a network from explicit parameters; `params` must match the layout.
    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Config(format!("invalid layer sizes {sizes:?}")));
        }
        let expected = param_count(sizes);
        if params.len() != expected {
            return Err(Error::ParamShape(format!(
                "expected {expected} parameters for {sizes:?}, got {}",
                params.len()
            )));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn check_same_shape(&self, other: &Mlp) -> Result<()> {
        if self.sizes != other.sizes {
            return Err(Error::ParamShape(format!(
                "{:?} vs {:?}",
                self.sizes, other.sizes
            )));
        }
        Ok(())
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &Mlp, scale: f64) -> Result<()> {
        self.check_same_shape(other)?;
        for (p, q) in self.params.iter_mut().zip(&other.params) {
            *p += scale * q;
        }
        Ok(())
    }

    fn offsets(&self, layer: usize) -> (usize, usize) {
        let mut off = 0;
        for w in self.sizes.windows(2).take(layer) {
            off += w[0] * w[1] + w[1];
        }
        (off, off + self.sizes[layer] * self.sizes[layer + 1])
    }

    fn weights(&self, layer: usize) -> &[f64] {
        let (w, b) = self.offsets(layer);
        &self.params[w..b]
    }

    fn bias(&self, layer: usize) -> &[f64] {
        let (_, b) = self.offsets(layer);
        &self.params[b..b + self.sizes[layer + 1]]
    }

    /// Single-sample forward pass.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let tape = self.record(&Matrix::from_vec(1, x.len(), x.to_vec()))?;
        Ok(tape.acts.last().unwrap().row(0).to_vec())
    }

    /// Batched forward pass returning only the output matrix.
    pub fn forward_batch(&self, x: &Matrix) -> Result<Matrix> {
        let mut tape = self.record(x)?;
        Ok(tape.acts.pop().unwrap())
    }

    /// Batched forward pass that keeps every layer's activations for backward.
    pub fn record(&self, x: &Matrix) -> Result<Tape> {
        if x.cols() != self.input_dim() {
            return Err(Error::InputShape {
                expected: self.input_dim(),
                got: x.cols(),
            });
        }
        let n_layers = self.n_layers();
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(x.clone());
        for l in 0..n_layers {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = self.weights(l);
            let b = self.bias(l);
            let input = &acts[l];
            let mut out = Matrix::zeros(input.rows(), fan_out);
            for r in 0..input.rows() {
                let xin = input.row(r);
                let y = out.row_mut(r);
                y.copy_from_slice(b);
                for k in 0..fan_in {
                    let xk = xin[k];
                    if xk == 0.0 {
                        continue;
                    }
                    let wk = &w[k * fan_out..(k + 1) * fan_out];
                    for (yj, wkj) in y.iter_mut().zip(wk) {
                        *yj += xk * wkj;
                    }
                }
                if l + 1 < n_layers {
                    for v in y.iter_mut() {
                        if *v < 0.0 {
                            *v = 0.0;
                        }
                    }
                }
            }
            acts.push(out);
        }
        Ok(Tape { acts })
    }

    /// Reverse-mode gradient of `sum_rows <upstream_row, output_row>` with
    /// respect to every parameter.
    pub fn backward(&self, tape: &Tape, upstream: &Matrix) -> Result<Mlp> {
        self.backward_inner(tape, upstream, None)
    }

    /// Like [`Mlp::backward`] but also returns the gradient with respect to the
    /// input batch.
    pub fn backward_with_input(&self, tape: &Tape, upstream: &Matrix) -> Result<(Mlp, Matrix)> {
        let mut gx = Matrix::default();
        let g = self.backward_inner(tape, upstream, Some(&mut gx))?;
        Ok((g, gx))
    }

    fn check_tape(&self, tape: &Tape) -> Result<usize> {
        if !tape.is_recorded() {
            return Err(Error::NoRecordedForward);
        }
        if tape.acts.len() != self.sizes.len()
            || tape
                .acts
                .iter()
                .zip(&self.sizes)
                .any(|(a, &s)| a.cols() != s)
        {
            return Err(Error::ParamShape(
                "tape was recorded by a network of different shape".into(),
            ));
        }
        Ok(tape.acts[0].rows())
    }

    fn backward_inner(
        &self,
        tape: &Tape,
        upstream: &Matrix,
        input_grad: Option<&mut Matrix>,
    ) -> Result<Mlp> {
        let batch = self.check_tape(tape)?;
        if upstream.rows() != batch || upstream.cols() != self.output_dim() {
            return Err(Error::ParamShape(format!(
                "upstream gradient is {}x{}, expected {}x{}",
                upstream.rows(),
                upstream.cols(),
                batch,
                self.output_dim()
            )));
        }
        let n_layers = self.n_layers();
        let mut grad = self.zeros_like();
        let mut delta = upstream.clone();
        for l in (0..n_layers).rev() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            if l + 1 < n_layers {
                let post = &tape.acts[l + 1];
                for (d, a) in delta.as_mut_slice().iter_mut().zip(post.as_slice()) {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let input = &tape.acts[l];
            let (wo, bo) = grad.offsets(l);
            {
                let (gw, gb) = grad.params[wo..bo + fan_out].split_at_mut(bo - wo);
                for r in 0..batch {
                    let d = delta.row(r);
                    let xin = input.row(r);
                    for (gbj, dj) in gb.iter_mut().zip(d) {
                        *gbj += dj;
                    }
                    for k in 0..fan_in {
                        let xk = xin[k];
                        if xk == 0.0 {
                            continue;
                        }
                        let gwk = &mut gw[k * fan_out..(k + 1) * fan_out];
                        for (g, dj) in gwk.iter_mut().zip(d) {
                            *g += xk * dj;
                        }
                    }
                }
            }
            if l > 0 || input_grad.is_some() {
                let w = self.weights(l);
                let mut prev = Matrix::zeros(batch, fan_in);
                for r in 0..batch {
                    let d = delta.row(r);
                    let p = prev.row_mut(r);
                    for k in 0..fan_in {
                        let wk = &w[k * fan_out..(k + 1) * fan_out];
                        let mut acc = 0.0;
                        for (wkj, dj) in wk.iter().zip(d) {
                            acc += wkj * dj;
                        }
                        p[k] = acc;
                    }
                }
                delta = prev;
            }
        }
        if let Some(gx) = input_grad {
            *gx = delta;
        }
        Ok(grad)
    }

    /// Input-gradient penalty for a scalar-output network.
    ///
    /// Value: `coef / B * sum_b || mask ⊙ d f(x_b) / d x_b ||^2` over the rows
    /// of the recorded batch. Returns the value and its parameter gradient.
    /// ReLU masks are piecewise constant, so bias gradients vanish and weight
    /// gradients are exact wherever no pre-activation sits on a kink.
    pub fn input_grad_penalty(&self, tape: &Tape, mask: &[bool], coef: f64) -> Result<(f64, Mlp)> {
        let batch = self.check_tape(tape)?;
        if self.output_dim() != 1 {
            return Err(Error::ParamShape(
                "input-gradient penalty needs a scalar-output network".into(),
            ));
        }
        if mask.len() != self.input_dim() {
            return Err(Error::InputShape {
                expected: self.input_dim(),
                got: mask.len(),
            });
        }
        let mut grad = self.zeros_like();
        if batch == 0 || coef == 0.0 {
            return Ok((0.0, grad));
        }
        let n_layers = self.n_layers();
        let scale = coef / batch as f64;
        let mut value = 0.0;
        // deltas[l] is the gradient of the output w.r.t. the pre-activation of layer l.
        let mut deltas: Vec<Vec<f64>> = vec![Vec::new(); n_layers];
        for r in 0..batch {
            deltas[n_layers - 1] = vec![1.0];
            for l in (1..n_layers).rev() {
                let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
                let w = self.weights(l);
                let post = tape.acts[l].row(r);
                let mut u = vec![0.0; fan_in];
                for k in 0..fan_in {
                    if post[k] <= 0.0 {
                        continue;
                    }
                    let wk = &w[k * fan_out..(k + 1) * fan_out];
                    let mut acc = 0.0;
                    for (wkj, dj) in wk.iter().zip(&deltas[l]) {
                        acc += wkj * dj;
                    }
                    u[k] = acc;
                }
                deltas[l - 1] = u;
            }
            let (fan_in0, fan_out0) = (self.sizes[0], self.sizes[1]);
            let w0 = self.weights(0);
            let mut gx = vec![0.0; fan_in0];
            for k in 0..fan_in0 {
                if !mask[k] {
                    continue;
                }
                let wk = &w0[k * fan_out0..(k + 1) * fan_out0];
                let mut acc = 0.0;
                for (wkj, dj) in wk.iter().zip(&deltas[0]) {
                    acc += wkj * dj;
                }
                gx[k] = acc;
            }
            value += gx.iter().map(|g| g * g).sum::<f64>();

            // Reverse through the input-gradient chain.
            let mut v: Vec<f64> = gx.iter().map(|g| 2.0 * scale * g).collect();
            for l in 0..n_layers {
                let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
                let w = self.weights(l);
                let (wo, _) = grad.offsets(l);
                let d = &deltas[l];
                let mut dd = vec![0.0; fan_out];
                for k in 0..fan_in {
                    let vk = v[k];
                    if vk == 0.0 {
                        continue;
                    }
                    let gwk = &mut grad.params[wo + k * fan_out..wo + (k + 1) * fan_out];
                    for (g, dj) in gwk.iter_mut().zip(d) {
                        *g += vk * dj;
                    }
                    let wk = &w[k * fan_out..(k + 1) * fan_out];
                    for (ddj, wkj) in dd.iter_mut().zip(wk) {
                        *ddj += wkj * vk;
                    }
                }
                if l + 1 == n_layers {
                    break;
                }
                let post = tape.acts[l + 1].row(r);
                for (x, a) in dd.iter_mut().zip(post) {
                    if *a <= 0.0 {
                        *x = 0.0;
                    }
                }
                v = dd;
            }
        }
        Ok((scale * value, grad))
    }
}

/// Log-softmax of a logit vector, computed with max subtraction.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&z| (z - max).exp()).sum();
    let log_z = max + sum.ln();
    logits.iter().map(|&z| z - log_z).collect()
}

/// `log softmax(logits)[index]`.
pub fn softmax_logits_to_logprob(logits: &[f64], index: usize) -> Result<f64> {
    if index >= logits.len() {
        return Err(Error::IndexOutOfRange {
            index,
            len: logits.len(),
        });
    }
    Ok(log_softmax(logits)[index])
}

/// Gradient of `log softmax(logits)[index]` with respect to the logits.
pub fn logprob_grad(logits: &[f64], index: usize) -> Vec<f64> {
    let lp = log_softmax(logits);
    lp.iter()
        .enumerate()
        .map(|(j, l)| if j == index { 1.0 } else { 0.0 } - l.exp())
        .collect()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
