//! Self-describing JSON checkpoints with a SHA-256 over the payload text.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use super::mlp::Mlp;
use super::normalizer::RunningNorm;
use super::policy::GaussianPolicy;
use super::{Sac, SacConfig, SacError, ACT_DIM};
use crate::par::Exec;

pub const CHECKPOINT_FORMAT: &str = "rlpp-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerTensors {
    /// `out x in` rows.
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedNetwork {
    pub name: String,
    pub sizes: Vec<usize>,
    pub layers: Vec<LayerTensors>,
}

impl NamedNetwork {
    fn from_mlp(name: &str, m: &Mlp) -> Self {
        let layers = (0..m.layers())
            .map(|l| LayerTensors { weight: m.weight(l).chunks(m.sizes()[l]).map(|r| r.to_vec()).collect(), bias: m.bias(l).to_vec() })
            .collect();
        NamedNetwork { name: name.into(), sizes: m.sizes().to_vec(), layers }
    }

    fn to_mlp(&self) -> Result<Mlp, SacError> {
        let w = self.layers.iter().map(|l| l.weight.concat()).collect();
        let b = self.layers.iter().map(|l| l.bias.clone()).collect();
        Mlp::from_parts(self.sizes.clone(), w, b).map_err(|e| SacError::Shape(format!("network {}: {e}", self.name)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub sac: SacConfig,
    /// SHA-256 of the environment parameters used for training.
    pub env_digest: String,
    pub seed: u64,
    pub step: u64,
    pub log_alpha: f64,
    pub normalizer: Option<RunningNorm>,
    pub networks: Vec<NamedNetwork>,
}

#[derive(Serialize)]
struct EnvelopeOut<'a> {
    format: &'a str,
    version: u32,
    sha256: String,
    payload: &'a RawValue,
}

#[derive(Deserialize)]
struct EnvelopeIn {
    format: String,
    version: u32,
    sha256: String,
    payload: Box<RawValue>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hex SHA-256 of a value's JSON encoding.
pub fn digest_json<T: Serialize>(value: &T) -> String {
    sha256_hex(serde_json::to_string(value).expect("serializable").as_bytes())
}

impl Checkpoint {
    pub fn from_agent(agent: &Sac, env_digest: &str, seed: u64, step: u64) -> Self {
        Checkpoint {
            obs_dim: agent.obs_dim(),
            act_dim: agent.actor.act_dim(),
            sac: agent.cfg.clone(),
            env_digest: env_digest.into(),
            seed,
            step,
            log_alpha: agent.log_alpha,
            normalizer: agent.cfg.normalize_obs.then(|| agent.norm.clone()),
            networks: vec![
                NamedNetwork::from_mlp("actor", &agent.actor.net),
                NamedNetwork::from_mlp("q1", &agent.q1),
                NamedNetwork::from_mlp("q2", &agent.q2),
                NamedNetwork::from_mlp("q1_target", &agent.q1_target),
                NamedNetwork::from_mlp("q2_target", &agent.q2_target),
            ],
        }
    }

    fn network(&self, name: &str) -> Result<Mlp, SacError> {
        self.networks.iter().find(|n| n.name == name).ok_or_else(|| SacError::Shape(format!("checkpoint has no network named {name}")))?.to_mlp()
    }

    /// Evaluation policy with frozen normalization.
    pub fn policy(&self) -> Result<DeployedPolicy, SacError> {
        let actor = GaussianPolicy::new(self.network("actor")?, self.act_dim)?;
        if actor.obs_dim() != self.obs_dim {
            return Err(SacError::Dimension { expected: self.obs_dim, got: actor.obs_dim() });
        }
        if let Some(n) = &self.normalizer {
            if n.dim() != self.obs_dim {
                return Err(SacError::Dimension { expected: self.obs_dim, got: n.dim() });
            }
        }
        Ok(DeployedPolicy { actor, norm: self.normalizer.clone() })
    }

    /// Rebuild the learner; optimizer moments start fresh.
    pub fn to_agent(&self, exec: Exec) -> Result<Sac, SacError> {
        let p = self.policy()?;
        let mut agent = Sac::from_networks(
            self.sac.clone(),
            p.actor,
            self.network("q1")?,
            self.network("q2")?,
            p.norm.unwrap_or_else(|| RunningNorm::new(self.obs_dim)),
            exec,
        );
        agent.q1_target = self.network("q1_target")?;
        agent.q2_target = self.network("q2_target")?;
        agent.log_alpha = self.log_alpha;
        Ok(agent)
    }

    pub fn to_json(&self) -> String {
        let payload = serde_json::to_string(self).expect("checkpoint serializes");
        let raw = RawValue::from_string(payload).expect("valid json");
        let env = EnvelopeOut { format: CHECKPOINT_FORMAT, version: CHECKPOINT_VERSION, sha256: sha256_hex(raw.get().as_bytes()), payload: &raw };
        serde_json::to_string(&env).expect("envelope serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SacError> {
        let env: EnvelopeIn = serde_json::from_str(text).map_err(|e| SacError::Integrity(format!("unreadable checkpoint: {e}")))?;
        if env.format != CHECKPOINT_FORMAT {
            return Err(SacError::Integrity(format!("unknown format {:?}", env.format)));
        }
        if env.version != CHECKPOINT_VERSION {
            return Err(SacError::Version { found: env.version, expected: CHECKPOINT_VERSION });
        }
        if sha256_hex(env.payload.get().as_bytes()) != env.sha256 {
            return Err(SacError::Integrity("checksum mismatch".into()));
        }
        let ck: Checkpoint = serde_json::from_str(env.payload.get()).map_err(|e| SacError::Integrity(format!("bad payload: {e}")))?;
        if ck.act_dim != ACT_DIM {
            return Err(SacError::Dimension { expected: ACT_DIM, got: ck.act_dim });
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<(), SacError> {
        let io = |source| SacError::Io { path: path.to_path_buf(), source };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io)?;
        }
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, self.to_json()).map_err(io)?;
        fs::rename(&tmp, path).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, SacError> {
        let text = fs::read_to_string(path).map_err(|source| SacError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }

    /// Load and require a given observation dimension.
    pub fn load_checked(path: &Path, obs_dim: usize) -> Result<Self, SacError> {
        let ck = Self::load(path)?;
        if ck.obs_dim != obs_dim {
            return Err(SacError::Dimension { expected: obs_dim, got: ck.obs_dim });
        }
        Ok(ck)
    }
}

/// Read-only actor plus frozen observation statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct DeployedPolicy {
    pub actor: GaussianPolicy,
    pub norm: Option<RunningNorm>,
}

impl DeployedPolicy {
    pub fn obs_dim(&self) -> usize {
        self.actor.obs_dim()
    }

    /// Deterministic action `tanh(mu)` for a raw observation.
    pub fn act(&self, raw_obs: &[f64]) -> Result<[f64; 2], SacError> {
        if raw_obs.len() != self.obs_dim() {
            return Err(SacError::Dimension { expected: self.obs_dim(), got: raw_obs.len() });
        }
        let x = match &self.norm {
            Some(n) => n.normalize(raw_obs),
            None => raw_obs.to_vec(),
        };
        let a = self.actor.deterministic(Exec::Sequential, &x, 1);
        Ok([a[0], a[1]])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn agent(obs_dim: usize) -> Sac {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut a = Sac::new(obs_dim, SacConfig { hidden: vec![8, 8], ..Default::default() }, Exec::Sequential, &mut rng).unwrap();
        for _ in 0..20 {
            let o: Vec<f64> = (0..obs_dim).map(|_| rng.random_range(-3.0..3.0)).collect();
            a.norm.update(&o);
        }
        a.log_alpha = -0.123456789012345;
        a
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        let a = agent(6);
        let ck = Checkpoint::from_agent(&a, "abc", 9, 1234);
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        let obs = [0.3, -1.2, 2.5, 0.0, 7.0, -0.01];
        let x = ck.policy().unwrap().act(&obs).unwrap();
        let y = back.policy().unwrap().act(&obs).unwrap();
        assert_eq!(x.map(f64::to_bits), y.map(f64::to_bits));
        let rebuilt = back.to_agent(Exec::Sequential).unwrap();
        assert_eq!(rebuilt.actor, a.actor);
        assert_eq!(rebuilt.q2_target, a.q2_target);
        assert_eq!(rebuilt.norm, a.norm);
        assert_eq!(rebuilt.log_alpha.to_bits(), a.log_alpha.to_bits());
    }

    #[test]
    fn truncated_file_fails_integrity() {
        let text = Checkpoint::from_agent(&agent(4), "", 0, 0).to_json();
        let cut = &text[..text.len() * 2 / 3];
        assert!(matches!(Checkpoint::from_json(cut), Err(SacError::Integrity(_))));
    }

    #[test]
    fn tampered_payload_fails_checksum() {
        let text = Checkpoint::from_agent(&agent(4), "", 0, 0).to_json();
        let tampered = text.replacen("\"step\":0", "\"step\":1", 1);
        assert_ne!(tampered, text);
        assert!(matches!(Checkpoint::from_json(&tampered), Err(SacError::Integrity(_))));
    }

    #[test]
    fn version_mismatch() {
        let text = Checkpoint::from_agent(&agent(4), "", 0, 0).to_json();
        let other = text.replacen("\"version\":1", "\"version\":99", 1);
        assert!(matches!(Checkpoint::from_json(&other), Err(SacError::Version { found: 99, .. })));
    }

    #[test]
    fn dimension_mismatch_on_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        Checkpoint::from_agent(&agent(4), "", 0, 0).save(&path).unwrap();
        assert!(matches!(Checkpoint::load_checked(&path, 125), Err(SacError::Dimension { expected: 125, got: 4 })));
        assert!(Checkpoint::load_checked(&path, 4).is_ok());
    }
}
