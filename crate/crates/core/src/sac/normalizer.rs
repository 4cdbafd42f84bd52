use serde::{Deserialize, Serialize};

pub const NORM_EPS: f64 = 1e-8;
pub const NORM_CLIP: f64 = 10.0;

/// Per-dimension running mean and variance (parallel-merge update, prior
/// count `1e-4`), used as `clip((x - mean) / sqrt(var + eps), ±10)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningNorm {
    pub count: f64,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl RunningNorm {
    pub fn new(dim: usize) -> Self {
        RunningNorm { count: 1e-4, mean: vec![0.0; dim], var: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn update(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.dim());
        let total = self.count + 1.0;
        for i in 0..x.len() {
            let delta = x[i] - self.mean[i];
            let m2 = self.var[i] * self.count + delta * delta * self.count / total;
            self.mean[i] += delta / total;
            self.var[i] = m2 / total;
        }
        self.count = total;
    }

    pub fn normalize_into(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..x.len() {
            out[i] = ((x[i] - self.mean[i]) / (self.var[i] + NORM_EPS).sqrt()).clamp(-NORM_CLIP, NORM_CLIP);
        }
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.normalize_into(x, &mut out);
        out
    }

    /// Normalize a row-major block of observations in place.
    pub fn normalize_rows(&self, rows: &mut [f64]) {
        let d = self.dim();
        for row in rows.chunks_mut(d) {
            for i in 0..d {
                row[i] = ((row[i] - self.mean[i]) / (self.var[i] + NORM_EPS).sqrt()).clamp(-NORM_CLIP, NORM_CLIP);
            }
        }
    }
}
