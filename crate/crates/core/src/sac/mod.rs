//! Soft Actor-Critic with a tanh-Gaussian actor, twin critics, target
//! networks and automatic entropy tuning. Everything runs in `f64` with
//! hand-written backprop; dense products go through `matrixmultiply`.

mod adam;
mod checkpoint;
pub mod losses;
mod mlp;
mod normalizer;
mod policy;
mod replay;
mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::EnvError;
use crate::par::Exec;

pub use adam::Adam;
pub use checkpoint::{digest_json, Checkpoint, DeployedPolicy, LayerTensors, NamedNetwork, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use mlp::{soft_update, Mlp, MlpCache};
pub use normalizer::RunningNorm;
pub use policy::{log_one_minus_tanh_sq, ActionMode, GaussianPolicy, PolicySample, LOG_STD_MAX, LOG_STD_MIN};
pub use replay::{Batch, ReplayBuffer};
pub use train::{train, write_metrics, MetricsRow, TrainOptions, TrainOutcome, METRICS_HEADER};

pub const ACT_DIM: usize = 2;

#[derive(Debug, Error)]
pub enum SacError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite {0}")]
    NonFinite(String),
    #[error("observation dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("replay buffer holds {have} transitions, need {need}")]
    BufferUnderfull { have: usize, need: usize },
    #[error("invalid SAC config: {0}")]
    InvalidConfig(String),
    #[error("environment failure: {0}")]
    Env(#[from] EnvError),
    #[error("{path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
    #[error("checkpoint integrity check failed: {0}")]
    Integrity(String),
    #[error("checkpoint format version {found} not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("metrics log: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SacConfig {
    pub lr: f64,
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub buffer_size: usize,
    pub target_entropy: f64,
    pub learning_starts: usize,
    pub train_freq: usize,
    pub gradient_steps: usize,
    pub total_steps: usize,
    pub hidden: Vec<usize>,
    pub normalize_obs: bool,
    /// Scale of the policy's output layer at init.
    pub policy_init_scale: f64,
    pub init_log_alpha: f64,
    /// Steps between periodic checkpoints (0 disables them).
    pub checkpoint_every: usize,
}

impl Default for SacConfig {
    fn default() -> Self {
        SacConfig {
            lr: 3e-4,
            gamma: 0.99,
            tau: 0.005,
            batch_size: 256,
            buffer_size: 1_000_000,
            target_entropy: -(ACT_DIM as f64),
            learning_starts: 100,
            train_freq: 1,
            gradient_steps: 1,
            total_steps: 200_000,
            hidden: vec![256, 256],
            normalize_obs: true,
            policy_init_scale: 1e-2,
            init_log_alpha: 0.0,
            checkpoint_every: 50_000,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<(), SacError> {
        let bad = |m: String| Err(SacError::InvalidConfig(m));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad(format!("tau must lie in (0, 1], got {}", self.tau));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if self.batch_size == 0 || self.buffer_size == 0 || self.train_freq == 0 {
            return bad("batch_size, buffer_size and train_freq must be >= 1".into());
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden layer widths must be non-empty and positive".into());
        }
        if !self.target_entropy.is_finite() || !self.init_log_alpha.is_finite() || !(self.policy_init_scale > 0.0) {
            return bad("target_entropy, init_log_alpha and policy_init_scale must be finite (scale > 0)".into());
        }
        Ok(())
    }

    fn sizes(&self, n_in: usize, n_out: usize) -> Vec<usize> {
        let mut s = vec![n_in];
        s.extend(&self.hidden);
        s.push(n_out);
        s
    }
}

/// Loss values of one update.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Losses {
    pub critic: f64,
    pub actor: f64,
    pub temperature: f64,
    /// Temperature used in this update (before its own step).
    pub alpha: f64,
    pub mean_log_prob: f64,
}

/// Full learner state.
#[derive(Debug, Clone)]
pub struct Sac {
    pub cfg: SacConfig,
    pub actor: GaussianPolicy,
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
    pub log_alpha: f64,
    pub norm: RunningNorm,
    opt_actor: Adam,
    opt_q1: Adam,
    opt_q2: Adam,
    opt_alpha: Adam,
    pub exec: Exec,
}

impl Sac {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, cfg: SacConfig, exec: Exec, rng: &mut R) -> Result<Self, SacError> {
        cfg.validate()?;
        let actor = GaussianPolicy::new(Mlp::new(&cfg.sizes(obs_dim, 2 * ACT_DIM), cfg.policy_init_scale, rng), ACT_DIM)?;
        let q1 = Mlp::new(&cfg.sizes(obs_dim + ACT_DIM, 1), 1.0, rng);
        let q2 = Mlp::new(&cfg.sizes(obs_dim + ACT_DIM, 1), 1.0, rng);
        Ok(Self::from_networks(cfg, actor, q1, q2, RunningNorm::new(obs_dim), exec))
    }

    pub(crate) fn from_networks(cfg: SacConfig, actor: GaussianPolicy, q1: Mlp, q2: Mlp, norm: RunningNorm, exec: Exec) -> Self {
        let lr = cfg.lr;
        let log_alpha = cfg.init_log_alpha;
        Sac {
            opt_actor: Adam::for_tensors(lr, &actor.net.tensors()),
            opt_q1: Adam::for_tensors(lr, &q1.tensors()),
            opt_q2: Adam::for_tensors(lr, &q2.tensors()),
            opt_alpha: Adam::new(lr, &[1]),
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            cfg,
            actor,
            q1,
            q2,
            log_alpha,
            norm,
            exec,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.obs_dim()
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    /// Policy input for a raw observation.
    pub fn prepare_obs(&self, raw: &[f64]) -> Vec<f64> {
        if self.cfg.normalize_obs {
            self.norm.normalize(raw)
        } else {
            raw.to_vec()
        }
    }

    /// Action for a raw observation.
    pub fn act<R: Rng + ?Sized>(&self, raw_obs: &[f64], mode: ActionMode, rng: &mut R) -> Result<[f64; 2], SacError> {
        let (a, _) = self.actor.act(&self.prepare_obs(raw_obs), mode, rng)?;
        Ok([a[0], a[1]])
    }

    /// One gradient step on temperature, critics and actor, then the
    /// target networks. `batch` observations must already be normalized.
    pub fn update<R: Rng + ?Sized>(&mut self, batch: &Batch, rng: &mut R) -> Result<Losses, SacError> {
        let b = batch.len;
        if b == 0 {
            return Err(SacError::BufferUnderfull { have: 0, need: 1 });
        }
        let exec = self.exec;
        let xi_pi = self.actor.noise(b, rng);
        let xi_next = self.actor.noise(b, rng);

        let s_pi = self.actor.sample_with_noise(exec, &batch.obs, b, &xi_pi, &mut MlpCache::default());
        let mean_log_prob = s_pi.log_prob.iter().sum::<f64>() / b as f64;
        let alpha = self.alpha();
        let (temperature, g_alpha) = losses::temperature_loss_and_grad(self.log_alpha, mean_log_prob, self.cfg.target_entropy);
        let mut la = [self.log_alpha];
        self.opt_alpha.step(vec![&mut la[..]], &[vec![g_alpha]])?;
        self.log_alpha = la[0];

        let y = losses::critic_targets(
            exec,
            &self.actor,
            &self.q1_target,
            &self.q2_target,
            &batch.next_obs,
            &batch.rewards,
            &batch.dones,
            &xi_next,
            alpha,
            self.cfg.gamma,
        );
        let (critic, g1, g2) = losses::critic_loss_and_grads(exec, &self.q1, &self.q2, &batch.obs, &batch.actions, &y);
        self.opt_q1.step(self.q1.tensors_mut(), &g1)?;
        self.opt_q2.step(self.q2.tensors_mut(), &g2)?;

        let al = losses::actor_loss_and_grads(exec, &self.actor, &self.q1, &self.q2, &batch.obs, &xi_pi, alpha);
        self.opt_actor.step(self.actor.net.tensors_mut(), &al.grads)?;

        soft_update(&mut self.q1_target, &self.q1, self.cfg.tau)?;
        soft_update(&mut self.q2_target, &self.q2, self.cfg.tau)?;
        if !critic.is_finite() || !al.loss.is_finite() || !self.log_alpha.is_finite() {
            return Err(SacError::NonFinite("loss".into()));
        }
        Ok(Losses { critic, actor: al.loss, temperature, alpha, mean_log_prob })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy(seed: u64) -> (Sac, ReplayBuffer, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = SacConfig { hidden: vec![16, 16], batch_size: 32, ..Default::default() };
        let sac = Sac::new(4, cfg, Exec::Sequential, &mut rng).unwrap();
        let mut buf = ReplayBuffer::new(4, 2, 1000);
        for i in 0..200 {
            let o: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let n: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let a = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            buf.push(&o, &a, o[0] - a[0].abs(), &n, i % 17 == 0);
        }
        (sac, buf, rng)
    }

    #[test]
    fn config_validation() {
        assert!(SacConfig::default().validate().is_ok());
        assert!(SacConfig { gamma: 1.0, ..Default::default() }.validate().is_err());
        assert!(SacConfig { tau: 0.0, ..Default::default() }.validate().is_err());
        assert!(SacConfig { batch_size: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn updates_are_deterministic_and_finite() {
        let run = || {
            let (mut sac, buf, mut rng) = toy(11);
            let mut out = Vec::new();
            for _ in 0..30 {
                let batch = buf.sample(32, &mut rng, None).unwrap();
                out.push(sac.update(&batch, &mut rng).unwrap());
            }
            (out, sac.actor.net.clone(), sac.q1_target.clone())
        };
        let (a, an, at) = run();
        let (b, bn, bt) = run();
        assert_eq!(a, b);
        assert_eq!(an, bn);
        assert_eq!(at, bt);
        assert!(a.iter().all(|l| l.alpha > 0.0 && l.alpha.is_finite()));
    }

    #[test]
    fn targets_move_only_by_soft_update() {
        let (mut sac, buf, mut rng) = toy(12);
        let t0 = sac.q1_target.clone();
        let q0 = sac.q1.clone();
        let batch = buf.sample(32, &mut rng, None).unwrap();
        sac.update(&batch, &mut rng).unwrap();
        let mut expect = t0.clone();
        soft_update(&mut expect, &sac.q1, sac.cfg.tau).unwrap();
        assert_eq!(sac.q1_target, expect);
        assert_ne!(sac.q1, q0);
    }

    #[test]
    fn clipped_double_q_is_pointwise_min() {
        let (sac, buf, mut rng) = toy(13);
        let batch = buf.sample(64, &mut rng, None).unwrap();
        let x = losses::critic_input(&batch.obs, &batch.actions, 64);
        let q1 = sac.q1.predict(Exec::Sequential, &x, 64);
        let q2 = sac.q2.predict(Exec::Sequential, &x, 64);
        for b in 0..64 {
            let m = q1[b].min(q2[b]);
            assert!(m <= q1[b] && m <= q2[b]);
        }
    }
}
