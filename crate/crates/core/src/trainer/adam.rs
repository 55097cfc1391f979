use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::numerics::{Gradients, ParamRegistry, Tensor};

/// Adam with bias correction. Moment buffers are created lazily per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: IndexMap<String, Tensor>,
    pub v: IndexMap<String, Tensor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl NamedArray {
    pub fn from_tensor(name: &str, t: &Tensor) -> Self {
        Self { name: name.to_string(), shape: t.shape().to_vec(), data: t.data().to_vec() }
    }

    pub fn to_tensor(&self) -> Result<Tensor, String> {
        Tensor::new(self.shape.clone(), self.data.clone()).map_err(|e| format!("array `{}`: {e}", self.name))
    }
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: IndexMap::new(), v: IndexMap::new() }
    }

    /// One update of every parameter not rejected by `frozen`. Any
    /// non-finite gradient aborts before anything is modified.
    pub fn step(
        &mut self,
        params: &mut ParamRegistry,
        grads: &Gradients,
        frozen: impl Fn(&str) -> bool,
    ) -> Result<(), TrainError> {
        for (name, g) in grads.iter() {
            if !g.is_finite() {
                return Err(TrainError::NonFiniteGradient(name.to_string()));
            }
        }
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (name, g) in grads.iter() {
            if frozen(name) {
                continue;
            }
            let p = params.get_mut(name).ok_or_else(|| TrainError::Config(format!("gradient for unknown `{name}`")))?;
            let zeros = || Tensor::zeros(g.shape().to_vec());
            let m = self.m.entry(name.to_string()).or_insert_with(zeros);
            let v = self.v.entry(name.to_string()).or_insert_with(zeros);
            for (((pi, gi), mi), vi) in
                p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut())
            {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *pi -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
