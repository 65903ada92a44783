use crate::approximator::{log_softmax, Matrix, Mlp};
use crate::demo::TransitionBatch;
use crate::error::{Error, Result};

use super::Encoder;

/// Log-ratio rewards are clipped to `[-REWARD_CLIP, REWARD_CLIP]`.
pub const REWARD_CLIP: f64 = 10.0;

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Debug)]
pub struct DiscriminatorLoss {
    pub value: f64,
    pub cross_entropy: f64,
    pub penalty: f64,
    pub grad: Mlp,
}

/// Discriminator objective. `Ψ = σ(logit)` is trained as the probability that
/// a tuple comes from the offline data, so its optimum is
/// `Ψ* = d_O / (d_O + d_E)`:
///
/// `-mean_E log(1 - Ψ) - mean_O log Ψ + gp * mean || ∂logit/∂x_cont ||²`
///
/// where the means are weighted by `expert_w` / `offline_w` (see
/// [`disc_inputs`]) and the penalty is evaluated at `u x_E + (1 - u) x_O`
/// for paired rows, `u = interp[i]`.
#[allow(clippy::too_many_arguments)]
pub fn discriminator_loss(
    disc: &Mlp,
    expert_x: &Matrix,
    expert_w: &[f64],
    offline_x: &Matrix,
    offline_w: &[f64],
    interp: &[f64],
    continuous: &[bool],
    gp: f64,
) -> Result<DiscriminatorLoss> {
    if expert_x.rows() == 0 || offline_x.rows() == 0 {
        return Err(Error::Validation("discriminator loss on an empty batch".into()));
    }
    if expert_w.len() != expert_x.rows() || offline_w.len() != offline_x.rows() {
        return Err(Error::Validation("one weight per discriminator row".into()));
    }
    let ne: f64 = expert_w.iter().sum();
    let no: f64 = offline_w.iter().sum();

    let tape_e = disc.record(expert_x)?;
    let z_e = tape_e.output().unwrap();
    let mut up_e = Matrix::zeros(expert_x.rows(), 1);
    let mut ce = 0.0;
    for r in 0..expert_x.rows() {
        let z = z_e.get(r, 0);
        let w = expert_w[r] / ne;
        ce += w * softplus(z);
        up_e.row_mut(r)[0] = w * sigmoid(z);
    }
    let tape_o = disc.record(offline_x)?;
    let z_o = tape_o.output().unwrap();
    let mut up_o = Matrix::zeros(offline_x.rows(), 1);
    for r in 0..offline_x.rows() {
        let z = z_o.get(r, 0);
        let w = offline_w[r] / no;
        ce += w * softplus(-z);
        up_o.row_mut(r)[0] = -w * sigmoid(-z);
    }
    let mut grad = disc.backward(&tape_e, &up_e)?;
    grad.add_scaled(&disc.backward(&tape_o, &up_o)?, 1.0)?;

    let mut penalty = 0.0;
    if gp != 0.0 {
        let pairs = expert_x.rows().min(offline_x.rows()).min(interp.len());
        if pairs > 0 {
            let cols = expert_x.cols();
            let mut mixed = Matrix::zeros(pairs, cols);
            for r in 0..pairs {
                let u = interp[r];
                let (xe, xo) = (expert_x.row(r), offline_x.row(r));
                for (m, (a, b)) in mixed.row_mut(r).iter_mut().zip(xe.iter().zip(xo)) {
                    *m = u * a + (1.0 - u) * b;
                }
            }
            let tape_m = disc.record(&mixed)?;
            let (p, pg) = disc.input_grad_penalty(&tape_m, continuous, gp)?;
            penalty = p;
            grad.add_scaled(&pg, 1.0)?;
        }
    }
    Ok(DiscriminatorLoss {
        value: ce + penalty,
        cross_entropy: ce,
        penalty,
        grad,
    })
}

/// `r = log(1/Ψ - 1) = log(d_E / d_O)` for `Ψ = d_O / (d_O + d_E)`, clipped.
pub fn log_ratio_reward(psi: f64) -> f64 {
    (1.0 / psi - 1.0).ln().clamp(-REWARD_CLIP, REWARD_CLIP)
}

/// Same as [`log_ratio_reward`] applied to discriminator logits: `r = -logit`.
pub fn reward_from_logits(logits: &Matrix) -> Vec<f64> {
    (0..logits.rows())
        .map(|r| (-logits.get(r, 0)).clamp(-REWARD_CLIP, REWARD_CLIP))
        .collect()
}

/// Action index fed to the discriminator for absorbing self-loops; the
/// scripted expert emits this no-op once every object is placed.
pub const ABSORBING_ACTION: usize = 0;

/// Row weight of an absorbing self-loop: it stands for the whole discounted
/// tail `γ + γ² + ...` after the terminal transition.
pub fn absorbing_weight(gamma: f64) -> f64 {
    gamma / (1.0 - gamma)
}

/// Discriminator inputs of a batch and their row weights: one unit-weight row
/// per transition, then one absorbing self-loop row `(c, s', c, no-op, g)` per
/// terminal transition.
pub fn disc_inputs(enc: &Encoder, batch: &TransitionBatch, gamma: f64) -> (Matrix, Vec<f64>) {
    let b = batch.len();
    let absorbing: Vec<usize> = (0..b).filter(|&r| batch.terminal[r]).collect();
    let mut x = Matrix::zeros(b + absorbing.len(), enc.disc_dim());
    for r in 0..b {
        enc.disc_row(x.row_mut(r), batch.c_prev[r], batch.s.row(r), batch.c[r], batch.a[r], batch.g.row(r));
    }
    for (i, &r) in absorbing.iter().enumerate() {
        let c = batch.c[r];
        enc.disc_row(x.row_mut(b + i), c, batch.s_next.row(r), c, ABSORBING_ACTION, batch.g.row(r));
    }
    let mut w = vec![1.0; b];
    w.resize(b + absorbing.len(), absorbing_weight(gamma));
    (x, w)
}

fn critic_inputs(enc: &Encoder, batch: &TransitionBatch) -> Matrix {
    // rows: [initial tuples; (c_prev, s); (c, s')]
    let b = batch.len();
    let b0 = batch.init_s.rows();
    let mut x = Matrix::zeros(b0 + 2 * b, enc.critic_dim());
    for r in 0..b0 {
        enc.critic_row(x.row_mut(r), enc.sentinel(), batch.init_s.row(r), batch.init_g.row(r));
    }
    for r in 0..b {
        enc.critic_row(x.row_mut(b0 + r), batch.c_prev[r], batch.s.row(r), batch.g.row(r));
        enc.critic_row(x.row_mut(b0 + b + r), batch.c[r], batch.s_next.row(r), batch.g.row(r));
    }
    x
}

/// `A = r + γ ν(c, s', g) - ν(c', s, g)`, using the observed successor state.
/// Only the first `batch.len()` rewards are read.
pub fn advantage(
    critic: &Mlp,
    enc: &Encoder,
    batch: &TransitionBatch,
    reward: &[f64],
    gamma: f64,
) -> Result<Vec<f64>> {
    let b = batch.len();
    let mut x = Matrix::zeros(2 * b, enc.critic_dim());
    for r in 0..b {
        enc.critic_row(x.row_mut(r), batch.c_prev[r], batch.s.row(r), batch.g.row(r));
        enc.critic_row(x.row_mut(b + r), batch.c[r], batch.s_next.row(r), batch.g.row(r));
    }
    let v = critic.forward_batch(&x)?;
    Ok((0..b)
        .map(|r| reward[r] + gamma * v.get(b + r, 0) - v.get(r, 0))
        .collect())
}

#[derive(Clone, Debug)]
pub struct CriticLoss {
    pub value: f64,
    pub penalty: f64,
    pub advantages: Vec<f64>,
    pub grad: Mlp,
}

/// Stabilized critic objective
/// `(1-γ) mean_init ν(sentinel, s0, g) + (1+α) log mean exp(A / (1+α))`
/// plus `gp * mean || ∂ν/∂x_cont ||²` at the offline samples.
///
/// A success state is absorbing: every terminal transition in the batch adds
/// a self-loop row with `A = r_abs + (γ - 1) ν(c, s', g)` and weight
/// [`absorbing_weight`] to the log-mean-exp.
/// `reward` holds the transition rewards followed by one reward per absorbing
/// row, in batch order (see [`disc_inputs`]).
pub fn critic_loss(
    critic: &Mlp,
    enc: &Encoder,
    batch: &TransitionBatch,
    reward: &[f64],
    gamma: f64,
    alpha: f64,
    gp: f64,
) -> Result<CriticLoss> {
    let b = batch.len();
    let b0 = batch.init_s.rows();
    if b == 0 || b0 == 0 {
        return Err(Error::Validation("critic loss on an empty batch".into()));
    }
    let absorbing: Vec<usize> = (0..b).filter(|&r| batch.terminal[r]).collect();
    if reward.len() != b + absorbing.len() {
        return Err(Error::Validation(format!(
            "{} rewards for {b} transitions and {} absorbing rows",
            reward.len(),
            absorbing.len()
        )));
    }
    let x = critic_inputs(enc, batch);
    let tape = critic.record(&x)?;
    let v = tape.output().unwrap();
    let init_mean = (0..b0).map(|r| v.get(r, 0)).sum::<f64>() / b0 as f64;
    let advantages: Vec<f64> = (0..b)
        .map(|r| reward[r] + gamma * v.get(b0 + b + r, 0) - v.get(b0 + r, 0))
        .collect();
    let scale = 1.0 + alpha;
    let scaled: Vec<f64> = advantages
        .iter()
        .copied()
        .chain(
            absorbing
                .iter()
                .zip(&reward[b..])
                .map(|(&r, ra)| ra + (gamma - 1.0) * v.get(b0 + b + r, 0)),
        )
        .map(|a| a / scale)
        .collect();
    let m = absorbing_weight(gamma);
    let row_w = |i: usize| if i < b { 1.0 } else { m };
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = scaled.iter().enumerate().map(|(i, x)| row_w(i) * (x - max).exp()).sum();
    let log_mean_exp = max + (sum / (b as f64 + m * absorbing.len() as f64)).ln();
    let mut value = (1.0 - gamma) * init_mean + scale * log_mean_exp;

    let mut up = Matrix::zeros(x.rows(), 1);
    for r in 0..b0 {
        up.row_mut(r)[0] = (1.0 - gamma) / b0 as f64;
    }
    for (r, s) in scaled[..b].iter().enumerate() {
        let p = (s - max).exp() / sum;
        up.row_mut(b0 + r)[0] = -p;
        up.row_mut(b0 + b + r)[0] = gamma * p;
    }
    for (&r, s) in absorbing.iter().zip(&scaled[b..]) {
        let p = m * (s - max).exp() / sum;
        up.row_mut(b0 + b + r)[0] += (gamma - 1.0) * p;
    }
    let mut grad = critic.backward(&tape, &up)?;

    let mut penalty = 0.0;
    if gp != 0.0 {
        let mut xs = Matrix::zeros(b, enc.critic_dim());
        for r in 0..b {
            xs.row_mut(r).copy_from_slice(x.row(b0 + r));
        }
        let tape_s = critic.record(&xs)?;
        let (p, pg) = critic.input_grad_penalty(&tape_s, &enc.critic_continuous_mask(), gp)?;
        penalty = p;
        value += p;
        grad.add_scaled(&pg, 1.0)?;
    }
    Ok(CriticLoss {
        value,
        penalty,
        advantages,
        grad,
    })
}

/// Self-normalized optimal weights: batch softmax of `A / (1+α)`.
pub fn importance_weights(advantages: &[f64], alpha: f64) -> Vec<f64> {
    let scaled: Vec<f64> = advantages.iter().map(|a| a / (1.0 + alpha)).collect();
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scaled.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Unnormalized optimal weights `exp(A / (1+α) - 1)`.
pub fn raw_importance_weights(advantages: &[f64], alpha: f64) -> Vec<f64> {
    advantages
        .iter()
        .map(|a| (a / (1.0 + alpha) - 1.0).exp())
        .collect()
}

#[derive(Clone, Debug)]
pub struct PolicyLoss {
    pub value: f64,
    pub grad_high: Mlp,
    pub grad_low: Mlp,
}

/// Weighted behavior cloning of both levels:
/// `-Σ w (log π_H(c | s, c', g) + log π_L(a | s, c, g))`.
pub fn policy_loss(
    high: &Mlp,
    low: &Mlp,
    enc: &Encoder,
    batch: &TransitionBatch,
    weights: &[f64],
) -> Result<PolicyLoss> {
    let b = batch.len();
    if b == 0 {
        return Err(Error::Validation("policy loss on an empty batch".into()));
    }
    if weights.len() != b {
        return Err(Error::Validation(format!("{} weights for {b} transitions", weights.len())));
    }
    let xh = enc.high_batch(&batch.s, &batch.c_prev, &batch.g);
    let xl = enc.low_batch(&batch.s, &batch.c, &batch.g);
    let th = high.record(&xh)?;
    let tl = low.record(&xl)?;
    let (zh, zl) = (th.output().unwrap(), tl.output().unwrap());
    let mut up_h = Matrix::zeros(b, high.output_dim());
    let mut up_l = Matrix::zeros(b, low.output_dim());
    let mut value = 0.0;
    for r in 0..b {
        let w = weights[r];
        let lh = log_softmax(zh.row(r));
        let ll = log_softmax(zl.row(r));
        value -= w * (lh[batch.c[r]] + ll[batch.a[r]]);
        for (j, (u, l)) in up_h.row_mut(r).iter_mut().zip(&lh).enumerate() {
            *u = w * (l.exp() - if j == batch.c[r] { 1.0 } else { 0.0 });
        }
        for (j, (u, l)) in up_l.row_mut(r).iter_mut().zip(&ll).enumerate() {
            *u = w * (l.exp() - if j == batch.a[r] { 1.0 } else { 0.0 });
        }
    }
    Ok(PolicyLoss {
        value,
        grad_high: high.backward(&th, &up_h)?,
        grad_low: low.backward(&tl, &up_l)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reward_identities() {
        assert_eq!(log_ratio_reward(0.5), 0.0);
        let e = std::f64::consts::E;
        assert!((log_ratio_reward(1.0 / (1.0 + e)) - 1.0).abs() < 1e-12);
        assert!((log_ratio_reward(e / (1.0 + e)) + 1.0).abs() < 1e-12);
        assert_eq!(log_ratio_reward(1e-6), REWARD_CLIP);
        assert_eq!(log_ratio_reward(1.0 - 1e-6), -REWARD_CLIP);
        let z = Matrix::from_vec(3, 1, vec![0.0, 30.0, -2.0]);
        assert_eq!(reward_from_logits(&z), vec![0.0, -10.0, 2.0]);
    }

    #[test]
    fn weight_identities() {
        let w = importance_weights(&[0.3; 5], 0.05);
        assert!(w.iter().all(|&x| (x - 0.2).abs() < 1e-15));
        let alpha = 0.05;
        let raw = raw_importance_weights(&[1.0 + alpha], alpha);
        assert!((raw[0] - 1.0).abs() < 1e-15);
        let w = importance_weights(&[0.0, (1.0 + alpha) * 3f64.ln()], alpha);
        assert!((w[0] - 0.25).abs() < 1e-12 && (w[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn constant_half_discriminator() {
        // zero weights => logit 0 => Ψ = 0.5 everywhere
        let disc = Mlp::zeros(&[4, 3, 1]);
        let x = Matrix::from_rows(&[[0.1, 0.2, 0.3, 0.4], [1.0, 0.0, 0.0, 1.0]]);
        let loss = discriminator_loss(&disc, &x, &[1.0; 2], &x, &[1.0; 2], &[0.3, 0.7], &[true; 4], 10.0).unwrap();
        assert!((loss.value - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert_eq!(loss.penalty, 0.0);
    }

    #[test]
    fn empty_batches_are_rejected() {
        let disc = Mlp::zeros(&[2, 1]);
        let empty = Matrix::zeros(0, 2);
        let one = Matrix::zeros(1, 2);
        assert!(discriminator_loss(&disc, &empty, &[], &one, &[1.0], &[], &[true; 2], 0.0).is_err());
    }
}
