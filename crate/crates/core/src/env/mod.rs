//! The racing environment: a PP baseline plus a residual action, integrated
//! at the control rate, with curriculum start speeds and friction
//! randomization between episodes.

mod observation;
mod reward;
mod telemetry;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{compose_command, pp_command, residual_scale, ControlError, PpConfig, ResidualConfig};
use crate::dynamics::{randomize_friction, ControlInput, FrictionModel, SimError, Simulator, VehicleModel, VehicleState};
use crate::track::{Circuit, FrenetPose};

pub use observation::{build_observation, observation, ObservationConfig};
pub use reward::{compute_reward, Gating, RewardBreakdown, RewardConfig, RewardInputs, SpeedMeasure};
pub use telemetry::{write_telemetry, TelemetryRow, TELEMETRY_HEADER};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("episode has no steps")]
    EmptyEpisode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartMode {
    /// Uniform over the lap (first half of the path for open tracks).
    #[default]
    Uniform,
    /// Always at `start_s`.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub observation: ObservationConfig,
    pub reward: RewardConfig,
    /// RK4 step [s]; the control period is `reward.t_sim`.
    pub dt_phys: f64,
    pub max_steps: usize,
    /// Collision disc radius [m].
    pub r_car: f64,
    /// Curriculum mean before any episode has finished [m/s].
    pub v_warmstart: f64,
    /// Standard deviation of the initial speed draw [m/s].
    pub v_init_std: f64,
    pub start: StartMode,
    pub start_s: f64,
    pub randomize_friction: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            observation: ObservationConfig::default(),
            reward: RewardConfig::default(),
            dt_phys: 0.005,
            max_steps: 5000,
            r_car: 0.15,
            v_warmstart: 1.5,
            v_init_std: 0.5,
            start: StartMode::Uniform,
            start_s: 0.0,
            randomize_friction: true,
        }
    }
}

impl EnvConfig {
    pub fn dt_ctrl(&self) -> f64 {
        self.reward.t_sim
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        self.observation.validate().map_err(EnvError::InvalidConfig)?;
        self.reward.validate().map_err(EnvError::InvalidConfig)?;
        if self.max_steps == 0 {
            return Err(EnvError::InvalidConfig("max_steps must be >= 1".into()));
        }
        for (name, v) in [("r_car", self.r_car), ("v_warmstart", self.v_warmstart), ("v_init_std", self.v_init_std)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(EnvError::InvalidConfig(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !self.start_s.is_finite() {
            return Err(EnvError::InvalidConfig("start_s must be finite".into()));
        }
        Ok(())
    }
}

/// Everything besides the circuit that defines an environment.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvParams {
    pub model: VehicleModel,
    pub friction: FrictionModel,
    pub pp: PpConfig,
    pub residual: ResidualConfig,
    pub env: EnvConfig,
}

impl EnvParams {
    pub fn validate(&self) -> Result<(), EnvError> {
        self.model.validate()?;
        self.friction.validate()?;
        self.pp.validate()?;
        self.residual.validate()?;
        self.env.validate()?;
        Simulator::new(self.model, self.friction.mu_nominal, self.env.dt_ctrl(), self.env.dt_phys)?;
        Ok(())
    }
}

/// Explicit initial conditions; unset fields fall back to the configured
/// distributions.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ResetOptions {
    pub s: Option<f64>,
    pub vx: Option<f64>,
    pub mu: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepInfo {
    /// Elapsed episode time after this step [s].
    pub t: f64,
    /// Raceline pose after the step.
    pub s: f64,
    pub d: f64,
    pub delta_psi: f64,
    /// Unwrapped advancement since reset [m].
    pub progress: f64,
    pub cmd: ControlInput,
    pub state: VehicleState,
    pub collision: bool,
    pub sim_error: bool,
    /// End of an open track reached.
    pub finished: bool,
    /// Time of the lap closed during this step.
    pub lap_time: Option<f64>,
    /// Share of this step's advancement that belongs to the closed lap.
    pub lap_fraction: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub reward: RewardBreakdown,
    pub terminated: bool,
    pub truncated: bool,
    pub info: StepInfo,
}

/// Mean of a finished episode's longitudinal speed trace.
pub fn update_curriculum(vx_trace: &[f64]) -> Result<f64, EnvError> {
    if vx_trace.is_empty() {
        return Err(EnvError::EmptyEpisode);
    }
    Ok(vx_trace.iter().sum::<f64>() / vx_trace.len() as f64)
}

/// Initial speed draw `N(mean, std)`: returns `(raw, clamped to [0, v_max])`.
pub fn sample_initial_speed<R: Rng + ?Sized>(rng: &mut R, mean: f64, std: f64, v_max: f64) -> (f64, f64) {
    let raw = if std > 0.0 { Normal::new(mean, std).expect("std validated").sample(rng) } else { mean };
    (raw, raw.clamp(0.0, v_max))
}

pub struct RacingEnv {
    circuit: Arc<Circuit>,
    params: EnvParams,
    sim: Simulator,
    rng: ChaCha8Rng,
    obs: Vec<f64>,
    scratch: Vec<[f64; 2]>,
    s: f64,
    progress: f64,
    steps: usize,
    laps: usize,
    lap_start_t: f64,
    curriculum: f64,
    ep_vx_sum: f64,
    ep_steps: usize,
    done: bool,
}

impl RacingEnv {
    pub fn new(circuit: Arc<Circuit>, params: EnvParams, seed: u64) -> Result<Self, EnvError> {
        params.validate()?;
        let sim = Simulator::new(params.model, params.friction.mu_nominal, params.env.dt_ctrl(), params.env.dt_phys)?;
        let n = params.env.observation.n;
        let mut env = RacingEnv {
            circuit,
            params,
            sim,
            rng: ChaCha8Rng::seed_from_u64(seed),
            obs: vec![0.0; params.env.observation.dim()],
            scratch: vec![[0.0; 2]; 3 * n],
            s: 0.0,
            progress: 0.0,
            steps: 0,
            laps: 0,
            lap_start_t: 0.0,
            curriculum: params.env.v_warmstart,
            ep_vx_sum: 0.0,
            ep_steps: 0,
            done: true,
        };
        env.place(0.0, 0.0, params.friction.mu_nominal);
        Ok(env)
    }

    pub fn params(&self) -> &EnvParams {
        &self.params
    }

    pub fn circuit(&self) -> &Arc<Circuit> {
        &self.circuit
    }

    pub fn obs_dim(&self) -> usize {
        self.obs.len()
    }

    pub fn observation(&self) -> &[f64] {
        &self.obs
    }

    pub fn state(&self) -> &VehicleState {
        &self.sim.state
    }

    pub fn mu(&self) -> f64 {
        self.sim.mu
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn laps(&self) -> usize {
        self.laps
    }

    /// Mean of the curriculum start-speed distribution for the next reset.
    pub fn curriculum_mean(&self) -> f64 {
        self.curriculum
    }

    pub fn set_curriculum_mean(&mut self, v: f64) {
        self.curriculum = v;
    }

    /// Start a new episode from the configured distributions.
    pub fn reset(&mut self) -> &[f64] {
        self.reset_with(ResetOptions::default())
    }

    pub fn reset_with(&mut self, opts: ResetOptions) -> &[f64] {
        if self.ep_steps > 0 {
            self.curriculum = self.ep_vx_sum / self.ep_steps as f64;
        }
        let cfg = self.params.env;
        let len = self.circuit.length();
        let s = opts.s.unwrap_or_else(|| match cfg.start {
            StartMode::Fixed => cfg.start_s,
            StartMode::Uniform if self.circuit.raceline().closed() => self.rng.random_range(0.0..len),
            StartMode::Uniform => self.rng.random_range(0.0..0.5 * len),
        });
        let vx = opts.vx.unwrap_or_else(|| sample_initial_speed(&mut self.rng, self.curriculum, cfg.v_init_std, self.params.model.limits.v_max).1);
        let mu = opts.mu.unwrap_or_else(|| {
            if cfg.randomize_friction {
                randomize_friction(&self.params.friction, &mut self.rng)
            } else {
                self.params.friction.mu_nominal
            }
        });
        self.place(s, vx, mu);
        &self.obs
    }

    fn place(&mut self, s: f64, vx: f64, mu: f64) {
        let s = self.circuit.wrap_s(s);
        let (x, y, phi) = self.circuit.raceline().frenet_to_cartesian(FrenetPose { s, d: 0.0 });
        self.sim.reset(VehicleState { x, y, phi, vx, vy: 0.0, r: 0.0 }, mu);
        let (ps, _, _) = build_observation(&self.sim.state, &self.circuit, &self.params.env.observation, &mut self.scratch, &mut self.obs);
        self.s = ps;
        self.progress = 0.0;
        self.steps = 0;
        self.laps = 0;
        self.lap_start_t = 0.0;
        self.ep_vx_sum = 0.0;
        self.ep_steps = 0;
        self.done = false;
    }

    /// Baseline command at the current state.
    pub fn pp_command(&self) -> ControlInput {
        pp_command(&self.sim.state, self.circuit.raceline(), &self.params.pp, &self.params.model.vehicle)
    }

    /// Apply residual action `u_nn` in `[-1, 1]^2` for one control period.
    pub fn step(&mut self, action: [f64; 2]) -> Result<StepResult, EnvError> {
        let u_rl = residual_scale(action, &self.params.residual)?;
        let cmd = compose_command(self.pp_command(), u_rl, &self.params.model.limits);
        let cfg = self.params.env;
        let dt = cfg.dt_ctrl();
        let t_prev = self.steps as f64 * dt;
        self.steps += 1;
        let t = self.steps as f64 * dt;

        let state = match self.sim.step(cmd) {
            Ok(s) => s,
            Err(SimError::NonFinite) => {
                self.done = true;
                let reward =
                    compute_reward(&RewardInputs { ds: 0.0, d: 0.0, delta_psi: 0.0, vx: 0.0, vy: 0.0, w_track: 1.0, collision: true }, &cfg.reward);
                let info = StepInfo { t, s: self.s, progress: self.progress, cmd, collision: true, sim_error: true, ..Default::default() };
                return Ok(StepResult { reward, terminated: true, truncated: false, info });
            }
            Err(e) => return Err(e.into()),
        };
        self.ep_vx_sum += state.vx;
        self.ep_steps += 1;

        let (s, d, delta_psi) = build_observation(&state, &self.circuit, &cfg.observation, &mut self.scratch, &mut self.obs);
        let len = self.circuit.length();
        let mut ds = s - self.s;
        if self.circuit.raceline().closed() {
            if ds > 0.5 * len {
                ds -= len;
            } else if ds < -0.5 * len {
                ds += len;
            }
        }
        let p_prev = self.progress;
        self.progress += ds;
        self.s = s;

        let sample = self.circuit.query(s);
        let collision = if d >= 0.0 { d + cfg.r_car > sample.w_left } else { -d + cfg.r_car > sample.w_right };
        let reward =
            compute_reward(&RewardInputs { ds, d, delta_psi, vx: state.vx, vy: state.vy, w_track: sample.w_track(), collision }, &cfg.reward);

        let mut info = StepInfo { t, s, d, delta_psi, progress: self.progress, cmd, state, collision, ..Default::default() };
        if self.circuit.raceline().closed() {
            let boundary = (self.laps + 1) as f64 * len;
            if self.progress >= boundary && p_prev < boundary {
                let frac = (boundary - p_prev) / (self.progress - p_prev);
                let t_cross = t_prev + frac * dt;
                info.lap_time = Some(t_cross - self.lap_start_t);
                info.lap_fraction = Some(frac);
                self.lap_start_t = t_cross;
                self.laps += 1;
            }
        } else if s >= len - cfg.observation.spacing {
            info.finished = true;
        }

        let terminated = collision || info.finished;
        let truncated = !terminated && self.steps >= cfg.max_steps;
        self.done = terminated || truncated;
        Ok(StepResult { reward, terminated, truncated, info })
    }

    pub fn is_done(&self) -> bool {
        self.done
    }
}
