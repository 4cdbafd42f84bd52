use serde::{Deserialize, Serialize};

use super::SacError;

/// Adam with bias correction; defaults `beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64, shapes: &[usize]) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn for_tensors(lr: f64, tensors: &[&[f64]]) -> Self {
        Self::new(lr, &tensors.iter().map(|t| t.len()).collect::<Vec<_>>())
    }

    pub fn first_moment(&self) -> &[Vec<f64>] {
        &self.m
    }

    pub fn second_moment(&self) -> &[Vec<f64>] {
        &self.v
    }

    /// One update of every tensor from its gradient.
    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: &[Vec<f64>]) -> Result<(), SacError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(SacError::Shape("optimizer tensor count mismatch".into()));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.len() != m.len() || g.len() != m.len() {
                return Err(SacError::Shape("optimizer tensor shape mismatch".into()));
            }
            if !g.iter().all(|x| x.is_finite()) {
                return Err(SacError::NonFinite("gradient".into()));
            }
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let step_size = self.lr / bc1;
        let bc2_sqrt = bc2.sqrt();
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let denom = v[i].sqrt() / bc2_sqrt + self.eps;
                p[i] -= step_size * m[i] / denom;
            }
        }
        Ok(())
    }
}
