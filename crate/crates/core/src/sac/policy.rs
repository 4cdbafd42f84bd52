//! Tanh-squashed diagonal Gaussian policy.

use std::f64::consts::{LN_2, PI};

use rand::Rng;
use rand_distr::StandardNormal;

use super::mlp::{Mlp, MlpCache};
use super::SacError;
use crate::par::Exec;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `log(1 - tanh(u)^2)` without cancellation for large `|u|`.
pub fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (LN_2 - u - softplus(-2.0 * u))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    Sample,
    Deterministic,
}

/// One batch of reparameterized draws, kept for backprop.
#[derive(Debug, Clone, Default)]
pub struct PolicySample {
    pub batch: usize,
    pub actions: Vec<f64>,
    pub log_prob: Vec<f64>,
    pub mean: Vec<f64>,
    /// Clamped log standard deviation.
    pub log_std: Vec<f64>,
    /// True where the raw log std was inside the clamp range.
    pub log_std_free: Vec<bool>,
    pub xi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub net: Mlp,
    act_dim: usize,
}

impl GaussianPolicy {
    /// The network must output `2 * act_dim` values: means then log stds.
    pub fn new(net: Mlp, act_dim: usize) -> Result<Self, SacError> {
        if net.n_out() != 2 * act_dim || act_dim == 0 {
            return Err(SacError::Shape(format!("policy head has {} outputs for action dim {act_dim}", net.n_out())));
        }
        Ok(GaussianPolicy { net, act_dim })
    }

    pub fn obs_dim(&self) -> usize {
        self.net.n_in()
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    /// Draw standard normal noise for `batch` items.
    pub fn noise<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<f64> {
        (0..batch * self.act_dim).map(|_| rng.sample(StandardNormal)).collect()
    }

    /// Reparameterized sample `a = tanh(mu + sigma * xi)` with its log density.
    pub fn sample_with_noise(&self, exec: Exec, obs: &[f64], batch: usize, xi: &[f64], cache: &mut MlpCache) -> PolicySample {
        let a_dim = self.act_dim;
        assert_eq!(xi.len(), batch * a_dim);
        let out = self.net.forward(exec, obs, batch, cache);
        let n = batch * a_dim;
        let mut s = PolicySample {
            batch,
            actions: vec![0.0; n],
            log_prob: vec![0.0; batch],
            mean: vec![0.0; n],
            log_std: vec![0.0; n],
            log_std_free: vec![true; n],
            xi: xi.to_vec(),
        };
        let half_log_2pi = 0.5 * (2.0 * PI).ln();
        for b in 0..batch {
            let row = &out[b * 2 * a_dim..(b + 1) * 2 * a_dim];
            let mut lp = 0.0;
            for j in 0..a_dim {
                let k = b * a_dim + j;
                let raw = row[a_dim + j];
                let ls = raw.clamp(LOG_STD_MIN, LOG_STD_MAX);
                s.log_std_free[k] = (LOG_STD_MIN..=LOG_STD_MAX).contains(&raw);
                let mu = row[j];
                let u = mu + ls.exp() * xi[k];
                s.mean[k] = mu;
                s.log_std[k] = ls;
                s.actions[k] = u.tanh();
                lp += -0.5 * xi[k] * xi[k] - ls - half_log_2pi - log_one_minus_tanh_sq(u);
            }
            s.log_prob[b] = lp;
        }
        s
    }

    pub fn sample<R: Rng + ?Sized>(&self, exec: Exec, obs: &[f64], batch: usize, rng: &mut R, cache: &mut MlpCache) -> PolicySample {
        let xi = self.noise(batch, rng);
        self.sample_with_noise(exec, obs, batch, &xi, cache)
    }

    /// `tanh(mu)` for every item.
    pub fn deterministic(&self, exec: Exec, obs: &[f64], batch: usize) -> Vec<f64> {
        let out = self.net.predict(exec, obs, batch);
        let a_dim = self.act_dim;
        (0..batch * a_dim).map(|k| out[(k / a_dim) * 2 * a_dim + k % a_dim].tanh()).collect()
    }

    /// Single-observation action and log-probability (`NaN` in deterministic mode).
    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], mode: ActionMode, rng: &mut R) -> Result<(Vec<f64>, f64), SacError> {
        if obs.len() != self.obs_dim() {
            return Err(SacError::Dimension { expected: self.obs_dim(), got: obs.len() });
        }
        match mode {
            ActionMode::Deterministic => Ok((self.deterministic(Exec::Sequential, obs, 1), f64::NAN)),
            ActionMode::Sample => {
                let s = self.sample(Exec::Sequential, obs, 1, rng, &mut MlpCache::default());
                Ok((s.actions, s.log_prob[0]))
            }
        }
    }

    /// Gradient w.r.t. the network output given `dL/da` and `dL/dlogp`
    /// per item, holding the noise fixed.
    pub fn output_grad(&self, s: &PolicySample, d_actions: &[f64], d_log_prob: &[f64]) -> Vec<f64> {
        let a_dim = self.act_dim;
        let mut g = vec![0.0; s.batch * 2 * a_dim];
        for b in 0..s.batch {
            for j in 0..a_dim {
                let k = b * a_dim + j;
                let a = s.actions[k];
                // d logp / du = 2 tanh(u); d a / du = 1 - tanh(u)^2
                let gu = d_actions[k] * (1.0 - a * a) + d_log_prob[b] * 2.0 * a;
                g[b * 2 * a_dim + j] = gu;
                if s.log_std_free[k] {
                    g[b * 2 * a_dim + a_dim + j] = gu * s.log_std[k].exp() * s.xi[k] - d_log_prob[b];
                }
            }
        }
        g
    }
}
