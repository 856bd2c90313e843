use serde::{Deserialize, Serialize};

use super::ParamSet;
use crate::Result;

/// Adaptive-moment optimizer state with bias correction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: ParamSet,
    pub v: ParamSet,
}

impl AdamState {
    pub fn new(params: &ParamSet, lr: f64) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn update(&mut self, params: &mut ParamSet, grads: &ParamSet) -> Result<()> {
        params.check_compatible(grads)?;
        params.check_compatible(&self.m)?;
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for (((p, g), m), v) in params
            .tensors
            .values_mut()
            .zip(grads.tensors.values())
            .zip(self.m.tensors.values_mut())
            .zip(self.v.tensors.values_mut())
        {
            for k in 0..p.data.len() {
                let gk = g.data[k];
                m.data[k] = b1 * m.data[k] + (1.0 - b1) * gk;
                v.data[k] = b2 * v.data[k] + (1.0 - b2) * gk * gk;
                let m_hat = m.data[k] / c1;
                let v_hat = v.data[k] / c2;
                p.data[k] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        params.step_count += 1;
        Ok(())
    }
}
