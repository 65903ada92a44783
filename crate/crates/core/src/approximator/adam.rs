use serde::{Deserialize, Serialize};

use super::Mlp;
use crate::error::{Error, Result};

/// Bias-corrected Adam state for one network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPS: f64 = 1e-7;

    pub fn new(net: &Mlp, lr: f64) -> Self {
        Self::with_params(net, lr, Self::BETA1, Self::BETA2, Self::EPS)
    }

    pub fn with_params(net: &Mlp, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps,
            step: 0,
            m: vec![0.0; net.num_params()],
            v: vec![0.0; net.num_params()],
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, net: &mut Mlp, grad: &Mlp) -> Result<()> {
        net.check_same_shape(grad)?;
        if self.m.len() != net.num_params() {
            return Err(Error::ParamShape(format!(
                "optimizer tracks {} parameters, network has {}",
                self.m.len(),
                net.num_params()
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (((p, g), m), v) in net
            .params_mut()
            .iter_mut()
            .zip(grad.params())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}
