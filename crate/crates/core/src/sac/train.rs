//! Single-threaded SAC training loop over a [`RacingEnv`].

use std::io::Write;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::checkpoint::Checkpoint;
use super::policy::ActionMode;
use super::replay::ReplayBuffer;
use super::{Losses, Sac, SacConfig, SacError, ACT_DIM};
use crate::env::RacingEnv;
use crate::par::Exec;

pub const METRICS_HEADER: &str = "step,episode,ep_reward,ep_len,lap_time,critic_loss,actor_loss,alpha";

/// One row per finished episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsRow {
    pub step: u64,
    pub episode: u64,
    pub ep_reward: f64,
    pub ep_len: u64,
    /// Best lap closed during the episode.
    pub lap_time: Option<f64>,
    /// Latest losses (empty before the first update).
    pub critic_loss: Option<f64>,
    pub actor_loss: Option<f64>,
    pub alpha: f64,
}

pub fn write_metrics<W: Write>(w: W, rows: &[MetricsRow]) -> Result<(), csv::Error> {
    let mut wr = csv::WriterBuilder::new().has_headers(true).from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    if rows.is_empty() {
        wr.write_record(METRICS_HEADER.split(','))?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Default)]
pub struct TrainOptions<'a> {
    pub exec: Exec,
    /// Streamed metrics CSV (header written first).
    pub metrics: Option<&'a mut dyn Write>,
    /// Final and periodic checkpoints go here.
    pub checkpoint_path: Option<PathBuf>,
    pub env_digest: String,
    /// Called after every environment step with the step count.
    pub progress: Option<&'a mut dyn FnMut(u64)>,
}

pub struct TrainOutcome {
    pub agent: Sac,
    pub checkpoint: Checkpoint,
    pub metrics: Vec<MetricsRow>,
}

/// Train a residual policy on `env` for `cfg.total_steps` steps.
///
/// Actions are uniform in `[-1, 1]^2` for the first `learning_starts`
/// steps, then sampled from the policy. Updates start once the buffer also
/// holds a full batch. Episodes end on termination or truncation; only
/// termination cuts the bootstrap. If the environment fails, the current
/// learner is checkpointed before the error is returned.
pub fn train(env: &mut RacingEnv, cfg: &SacConfig, seed: u64, mut opts: TrainOptions) -> Result<TrainOutcome, SacError> {
    cfg.validate()?;
    let obs_dim = env.obs_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agent = Sac::new(obs_dim, cfg.clone(), opts.exec, &mut rng)?;
    let mut buffer = ReplayBuffer::new(obs_dim, ACT_DIM, cfg.buffer_size);

    let mut csv_out = opts.metrics.take().map(|w| csv::WriterBuilder::new().has_headers(false).from_writer(w));
    if let Some(w) = csv_out.as_mut() {
        w.write_record(METRICS_HEADER.split(','))?;
        w.flush().map_err(csv::Error::from)?;
    }

    let mut metrics = Vec::new();
    let mut obs = env.reset().to_vec();
    let mut last: Option<Losses> = None;
    let (mut episode, mut ep_reward, mut ep_len, mut best_lap) = (0u64, 0.0, 0u64, None::<f64>);

    let flush = |agent: &Sac, step: u64| -> Result<(), SacError> {
        match &opts.checkpoint_path {
            Some(p) => Checkpoint::from_agent(agent, &opts.env_digest, seed, step).save(p),
            None => Ok(()),
        }
    };

    for step in 1..=cfg.total_steps as u64 {
        if cfg.normalize_obs {
            agent.norm.update(&obs);
        }
        let action = if step <= cfg.learning_starts as u64 {
            [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)]
        } else {
            agent.act(&obs, ActionMode::Sample, &mut rng)?
        };
        let res = match env.step(action) {
            Ok(r) => r,
            Err(e) => {
                flush(&agent, step - 1)?;
                return Err(e.into());
            }
        };
        let next = env.observation().to_vec();
        buffer.push(&obs, &action, res.reward.r_tot, &next, res.terminated);
        ep_reward += res.reward.r_tot;
        ep_len += 1;
        if let Some(t) = res.info.lap_time {
            best_lap = Some(best_lap.map_or(t, |b| b.min(t)));
        }

        if step > cfg.learning_starts as u64 && buffer.len() >= cfg.batch_size && step % cfg.train_freq as u64 == 0 {
            for _ in 0..cfg.gradient_steps {
                let norm = cfg.normalize_obs.then_some(&agent.norm);
                let batch = buffer.sample(cfg.batch_size, &mut rng, norm)?;
                last = Some(agent.update(&batch, &mut rng)?);
            }
        }

        if res.terminated || res.truncated {
            episode += 1;
            let row = MetricsRow {
                step,
                episode,
                ep_reward,
                ep_len,
                lap_time: best_lap,
                critic_loss: last.map(|l| l.critic),
                actor_loss: last.map(|l| l.actor),
                alpha: agent.alpha(),
            };
            if let Some(w) = csv_out.as_mut() {
                w.serialize(row)?;
                w.flush().map_err(csv::Error::from)?;
            }
            log::debug!("episode {episode} step {step} reward {ep_reward:.3} len {ep_len}");
            metrics.push(row);
            (ep_reward, ep_len, best_lap) = (0.0, 0, None);
            obs = env.reset().to_vec();
        } else {
            obs = next;
        }

        if cfg.checkpoint_every > 0 && step % cfg.checkpoint_every as u64 == 0 {
            flush(&agent, step)?;
            log::info!("step {step}: {episode} episodes, alpha {:.4}", agent.alpha());
        }
        if let Some(p) = opts.progress.as_mut() {
            p(step);
        }
    }

    let checkpoint = Checkpoint::from_agent(&agent, &opts.env_digest, seed, cfg.total_steps as u64);
    if let Some(p) = &opts.checkpoint_path {
        checkpoint.save(p)?;
    }
    Ok(TrainOutcome { agent, checkpoint, metrics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvParams, ResetOptions};
    use crate::track::{synthetic_straight, Circuit, ProfileLimits};
    use std::sync::Arc;

    fn corridor(max_steps: usize, seed: u64) -> RacingEnv {
        let c = Circuit::with_generated_raceline(synthetic_straight(60.0, 0.1, 0.6), &ProfileLimits::default()).unwrap();
        let mut p = EnvParams::default();
        p.pp.alpha_v = 0.3;
        p.env.max_steps = max_steps;
        RacingEnv::new(Arc::new(c), p, seed).unwrap()
    }

    fn small(total_steps: usize) -> SacConfig {
        SacConfig { hidden: vec![32, 32], batch_size: 64, total_steps, checkpoint_every: 0, ..Default::default() }
    }

    #[test]
    fn metrics_stream_matches_rows_and_checkpoint_loads() {
        let dir = tempfile::tempdir().unwrap();
        let ck = dir.path().join("ck.json");
        let mut buf = Vec::new();
        let mut seen = 0;
        let mut progress = |s: u64| seen = s;
        let out = train(
            &mut corridor(50, 1),
            &small(400),
            3,
            TrainOptions { metrics: Some(&mut buf), checkpoint_path: Some(ck.clone()), progress: Some(&mut progress), ..Default::default() },
        )
        .unwrap();
        assert_eq!(seen, 400);
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(METRICS_HEADER));
        assert_eq!(lines.count(), out.metrics.len());
        assert!(out.metrics.len() >= 7);
        assert!(out.metrics.windows(2).all(|w| w[0].step < w[1].step && w[0].episode + 1 == w[1].episode));
        assert!(out.metrics[0].critic_loss.is_none());
        assert!(out.metrics.last().unwrap().critic_loss.is_some());
        let back = Checkpoint::load_checked(&ck, 125).unwrap();
        assert_eq!(back, out.checkpoint);
        assert_eq!(back.step, 400);
    }

    fn rollout(env: &mut RacingEnv, act: impl Fn(&[f64]) -> [f64; 2]) -> f64 {
        let mut obs = env.reset_with(ResetOptions { s: Some(0.0), vx: Some(1.5), mu: Some(0.5) }).to_vec();
        let mut ret = 0.0;
        while !env.is_done() {
            ret += env.step(act(&obs)).unwrap().reward.r_tot;
            obs = env.observation().to_vec();
        }
        ret
    }

    #[test]
    fn learns_to_speed_up_on_a_corridor() {
        let mut env = corridor(80, 5);
        let out = train(&mut env, &small(8000), 5, TrainOptions::default()).unwrap();
        let policy = out.checkpoint.policy().unwrap();
        let mut eval = corridor(80, 6);
        let baseline = rollout(&mut eval, |_| [0.0, 0.0]);
        let learned = rollout(&mut eval, |o| policy.act(o).unwrap());
        assert!(learned > baseline, "learned {learned} vs baseline {baseline}");
        assert!(out.agent.alpha() > 0.0 && out.agent.alpha().is_finite());
    }
}
