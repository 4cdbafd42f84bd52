//! Declarative run configuration (TOML). Unknown keys are rejected at every
//! level; relative file paths resolve against the config file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{PpConfig, ResidualConfig};
use crate::dynamics::{FrictionModel, VehicleModel};
use crate::env::{EnvConfig, EnvParams};
use crate::harness::EvalOptions;
use crate::sac::SacConfig;
use crate::track::{load_raceline, load_track, Circuit, ProfileLimits, Raceline, TrackError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config{}: {msg}", .path.as_ref().map(|p| format!(" {}", p.display())).unwrap_or_default())]
    Parse { path: Option<PathBuf>, msg: String },
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("invalid {section}: {msg}")]
    Invalid { section: &'static str, msg: String },
    #[error("track {path}: {source}")]
    Track { path: PathBuf, source: TrackError },
}

impl ConfigError {
    fn invalid(section: &'static str, e: impl ToString) -> Self {
        ConfigError::Invalid { section, msg: e.to_string() }
    }
}

pub const GENERATE: &str = "generate";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackSource {
    /// Centerline CSV.
    pub path: PathBuf,
    /// Raceline CSV, or `"generate"` to derive one from the centerline.
    #[serde(default = "generate")]
    pub raceline: String,
}

fn generate() -> String {
    GENERATE.into()
}

fn default_out() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    pub track: TrackSource,
    #[serde(default)]
    pub profile: ProfileLimits,
    #[serde(default)]
    pub model: VehicleModel,
    #[serde(default)]
    pub friction: FrictionModel,
    #[serde(default)]
    pub pp: PpConfig,
    #[serde(default)]
    pub residual: ResidualConfig,
    #[serde(default)]
    pub env: EnvConfig,
    #[serde(default)]
    pub sac: SacConfig,
    #[serde(default)]
    pub eval: EvalOptions,
}

fn track_err(path: &Path) -> impl FnOnce(TrackError) -> ConfigError + '_ {
    move |source| ConfigError::Track { path: path.to_path_buf(), source }
}

impl RunConfig {
    /// Parse TOML; relative paths are joined onto `base`.
    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse { path: None, msg: e.to_string() })?;
        cfg.resolve(base);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base).map_err(|e| match e {
            ConfigError::Parse { msg, .. } => ConfigError::Parse { path: Some(path.to_path_buf()), msg },
            other => other,
        })
    }

    fn resolve(&mut self, base: &Path) {
        if self.track.path.is_relative() {
            self.track.path = base.join(&self.track.path);
        }
        if self.track.raceline != GENERATE && Path::new(&self.track.raceline).is_relative() {
            self.track.raceline = base.join(&self.track.raceline).to_string_lossy().into_owned();
        }
    }

    pub fn env_params(&self) -> EnvParams {
        EnvParams { model: self.model, friction: self.friction, pp: self.pp, residual: self.residual, env: self.env }
    }

    /// Range checks for every section plus existence of referenced files.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.track.path.is_file() {
            return Err(ConfigError::MissingFile(self.track.path.clone()));
        }
        if self.track.raceline != GENERATE && !Path::new(&self.track.raceline).is_file() {
            return Err(ConfigError::MissingFile(self.track.raceline.clone().into()));
        }
        self.profile.validate().map_err(|e| ConfigError::invalid("profile", e))?;
        self.env_params().validate().map_err(|e| ConfigError::invalid("environment", e))?;
        self.sac.validate().map_err(|e| ConfigError::invalid("sac", e))?;
        if self.eval.laps == 0 || !(self.eval.lap_timeout > 0.0) {
            return Err(ConfigError::invalid("eval", "laps and lap_timeout must be positive"));
        }
        Ok(())
    }

    pub fn build_circuit(&self) -> Result<Circuit, ConfigError> {
        let track = load_track(&self.track.path).map_err(track_err(&self.track.path))?;
        if self.track.raceline == GENERATE {
            return Circuit::with_generated_raceline(track, &self.profile).map_err(track_err(&self.track.path));
        }
        let rp = PathBuf::from(&self.track.raceline);
        let raceline: Raceline = load_raceline(&rp).map_err(track_err(&rp))?;
        Circuit::new(track, raceline).map_err(track_err(&rp))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
