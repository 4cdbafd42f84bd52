use rand::Rng;

use super::normalizer::RunningNorm;
use super::SacError;

/// Row-major minibatch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Batch {
    pub len: usize,
    pub obs: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_obs: Vec<f64>,
    /// 1.0 for terminal transitions.
    pub dones: Vec<f64>,
}

/// FIFO ring buffer of raw transitions. Storage grows on demand up to
/// `capacity`.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    obs_dim: usize,
    act_dim: usize,
    capacity: usize,
    len: usize,
    head: usize,
    obs: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_obs: Vec<f64>,
    dones: Vec<f64>,
}

impl ReplayBuffer {
    pub fn new(obs_dim: usize, act_dim: usize, capacity: usize) -> Self {
        assert!(capacity > 0);
        ReplayBuffer {
            obs_dim,
            act_dim,
            capacity,
            len: 0,
            head: 0,
            obs: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_obs: Vec::new(),
            dones: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Store one transition; returns the new size.
    pub fn push(&mut self, obs: &[f64], action: &[f64], reward: f64, next_obs: &[f64], done: bool) -> usize {
        assert_eq!(obs.len(), self.obs_dim);
        assert_eq!(next_obs.len(), self.obs_dim);
        assert_eq!(action.len(), self.act_dim);
        let d = if done { 1.0 } else { 0.0 };
        if self.len < self.capacity {
            self.obs.extend_from_slice(obs);
            self.actions.extend_from_slice(action);
            self.rewards.push(reward);
            self.next_obs.extend_from_slice(next_obs);
            self.dones.push(d);
            self.len += 1;
        } else {
            let i = self.head;
            self.obs[i * self.obs_dim..(i + 1) * self.obs_dim].copy_from_slice(obs);
            self.actions[i * self.act_dim..(i + 1) * self.act_dim].copy_from_slice(action);
            self.rewards[i] = reward;
            self.next_obs[i * self.obs_dim..(i + 1) * self.obs_dim].copy_from_slice(next_obs);
            self.dones[i] = d;
        }
        self.head = (self.head + 1) % self.capacity;
        self.len
    }

    /// Reward stored at slot `i` (storage order, not insertion order).
    pub fn reward_at(&self, i: usize) -> f64 {
        self.rewards[i]
    }

    /// Uniform indices with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<usize>, SacError> {
        if self.len == 0 {
            return Err(SacError::BufferUnderfull { have: 0, need: n.max(1) });
        }
        Ok((0..n).map(|_| rng.random_range(0..self.len)).collect())
    }

    /// Gather rows, normalizing observations when `norm` is given.
    pub fn gather(&self, idx: &[usize], norm: Option<&RunningNorm>) -> Batch {
        let (od, ad) = (self.obs_dim, self.act_dim);
        let mut b = Batch {
            len: idx.len(),
            obs: Vec::with_capacity(idx.len() * od),
            actions: Vec::with_capacity(idx.len() * ad),
            rewards: Vec::with_capacity(idx.len()),
            next_obs: Vec::with_capacity(idx.len() * od),
            dones: Vec::with_capacity(idx.len()),
        };
        for &i in idx {
            b.obs.extend_from_slice(&self.obs[i * od..(i + 1) * od]);
            b.actions.extend_from_slice(&self.actions[i * ad..(i + 1) * ad]);
            b.rewards.push(self.rewards[i]);
            b.next_obs.extend_from_slice(&self.next_obs[i * od..(i + 1) * od]);
            b.dones.push(self.dones[i]);
        }
        if let Some(n) = norm {
            n.normalize_rows(&mut b.obs);
            n.normalize_rows(&mut b.next_obs);
        }
        b
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R, norm: Option<&RunningNorm>) -> Result<Batch, SacError> {
        if self.len < n {
            return Err(SacError::BufferUnderfull { have: self.len, need: n });
        }
        let idx = self.sample_indices(n, rng)?;
        Ok(self.gather(&idx, norm))
    }
}
