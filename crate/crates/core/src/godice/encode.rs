use crate::approximator::Matrix;
use crate::env::N_ACTIONS;

/// Builds network inputs. The previous-option one-hot has `k + 1` slots; slot
/// `k` is the start sentinel, so `π_H(· | s, sentinel, g)` plays the role of
/// the initial option distribution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Encoder {
    pub k: usize,
    pub s_dim: usize,
    pub g_dim: usize,
}

impl Encoder {
    pub fn new(k: usize, s_dim: usize, g_dim: usize) -> Self {
        Self { k, s_dim, g_dim }
    }

    pub fn sentinel(&self) -> usize {
        self.k
    }

    /// `[s ++ onehot(c_prev, k+1) ++ g]`
    pub fn high_dim(&self) -> usize {
        self.s_dim + self.k + 1 + self.g_dim
    }

    /// `[s ++ onehot(c, k) ++ g]`
    pub fn low_dim(&self) -> usize {
        self.s_dim + self.k + self.g_dim
    }

    /// `[onehot(c_prev, k+1) ++ s ++ g]`
    pub fn critic_dim(&self) -> usize {
        self.k + 1 + self.s_dim + self.g_dim
    }

    /// `[onehot(c_prev, k+1) ++ s ++ onehot(c, k) ++ onehot(a, 6) ++ g]`
    pub fn disc_dim(&self) -> usize {
        self.k + 1 + self.s_dim + self.k + N_ACTIONS + self.g_dim
    }

    pub fn high_row(&self, out: &mut [f64], s: &[f64], c_prev: usize, g: &[f64]) {
        out.fill(0.0);
        out[..self.s_dim].copy_from_slice(s);
        out[self.s_dim + c_prev] = 1.0;
        out[self.s_dim + self.k + 1..].copy_from_slice(g);
    }

    pub fn low_row(&self, out: &mut [f64], s: &[f64], c: usize, g: &[f64]) {
        out.fill(0.0);
        out[..self.s_dim].copy_from_slice(s);
        out[self.s_dim + c] = 1.0;
        out[self.s_dim + self.k..].copy_from_slice(g);
    }

    pub fn critic_row(&self, out: &mut [f64], c_prev: usize, s: &[f64], g: &[f64]) {
        out.fill(0.0);
        out[c_prev] = 1.0;
        let o = self.k + 1;
        out[o..o + self.s_dim].copy_from_slice(s);
        out[o + self.s_dim..].copy_from_slice(g);
    }

    pub fn disc_row(&self, out: &mut [f64], c_prev: usize, s: &[f64], c: usize, a: usize, g: &[f64]) {
        out.fill(0.0);
        out[c_prev] = 1.0;
        let mut o = self.k + 1;
        out[o..o + self.s_dim].copy_from_slice(s);
        o += self.s_dim;
        out[o + c] = 1.0;
        o += self.k;
        out[o + a] = 1.0;
        o += N_ACTIONS;
        out[o..].copy_from_slice(g);
    }

    pub fn high_batch(&self, s: &Matrix, c_prev: &[usize], g: &Matrix) -> Matrix {
        let mut m = Matrix::zeros(c_prev.len(), self.high_dim());
        for (r, &cp) in c_prev.iter().enumerate() {
            self.high_row(m.row_mut(r), s.row(r), cp, g.row(r));
        }
        m
    }

    pub fn low_batch(&self, s: &Matrix, c: &[usize], g: &Matrix) -> Matrix {
        let mut m = Matrix::zeros(c.len(), self.low_dim());
        for (r, &cc) in c.iter().enumerate() {
            self.low_row(m.row_mut(r), s.row(r), cc, g.row(r));
        }
        m
    }

    pub fn disc_batch(&self, c_prev: &[usize], s: &Matrix, c: &[usize], a: &[usize], g: &Matrix) -> Matrix {
        let mut m = Matrix::zeros(c.len(), self.disc_dim());
        for r in 0..c.len() {
            self.disc_row(m.row_mut(r), c_prev[r], s.row(r), c[r], a[r], g.row(r));
        }
        m
    }

    /// Continuous (non one-hot) coordinates of the critic input.
    pub fn critic_continuous_mask(&self) -> Vec<bool> {
        (0..self.critic_dim()).map(|i| i > self.k).collect()
    }

    /// Continuous coordinates of the discriminator input.
    pub fn disc_continuous_mask(&self) -> Vec<bool> {
        let s0 = self.k + 1;
        let g0 = s0 + self.s_dim + self.k + N_ACTIONS;
        (0..self.disc_dim())
            .map(|i| (s0..s0 + self.s_dim).contains(&i) || i >= g0)
            .collect()
    }
}
