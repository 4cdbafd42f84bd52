//! Multi-lap evaluation, lap statistics and artifact export.

mod export;
mod stats;

use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::randomize_friction;
use crate::env::TelemetryRow;
use crate::env::{EnvError, EnvParams, RacingEnv, ResetOptions};
use crate::par::{self, Exec};
use crate::sac::{DeployedPolicy, SacError};
use crate::track::Circuit;

pub use export::{export_artifacts, read_lap_times, read_summary, trajectory_svg, velocity_svg, write_summary, SummaryRow, SUMMARY_HEADER};
pub use stats::{compare_metrics, gap_closure, improvement, lap_statistics, mean_std, sim_gap, Comparison, LapStats, StdConvention};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("no complete laps to summarize")]
    NoLaps,
    #[error("lap times must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("gap closure undefined: baseline {base} is not slower than reference {reference}")]
    DegenerateGap { base: f64, reference: f64 },
    #[error("unknown controller {0:?} (expected pp or rlpp)")]
    UnknownController(String),
    #[error("controller rlpp needs a checkpoint")]
    MissingCheckpoint,
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Policy(#[from] SacError),
    #[error("{path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Who drives.
#[derive(Debug, Clone)]
pub enum Controller {
    /// Pure Pursuit alone (zero residual).
    Pp,
    /// Pure Pursuit plus the deterministic residual policy.
    Rlpp(Box<DeployedPolicy>),
}

impl Controller {
    pub fn name(&self) -> &'static str {
        match self {
            Controller::Pp => "pp",
            Controller::Rlpp(_) => "rlpp",
        }
    }

    /// Parse a controller name; `rlpp` takes the policy.
    pub fn from_name(name: &str, policy: Option<DeployedPolicy>) -> Result<Self, HarnessError> {
        match name {
            "pp" => Ok(Controller::Pp),
            "rlpp" => policy.map(|p| Controller::Rlpp(Box::new(p))).ok_or(HarnessError::MissingCheckpoint),
            other => Err(HarnessError::UnknownController(other.into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalOptions {
    pub laps: usize,
    /// Laps driven before recording starts (from the standing start).
    pub warmup_laps: usize,
    pub start_s: f64,
    /// Initial speed; `None` uses the environment's warm-start speed.
    pub start_vx: Option<f64>,
    /// Friction coefficient; `None` uses the nominal value unless
    /// `randomize_friction` is set.
    pub mu: Option<f64>,
    /// Draw the friction coefficient from the seed.
    pub randomize_friction: bool,
    /// Abort a lap after this many seconds.
    pub lap_timeout: f64,
    pub std: StdConvention,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            laps: 10,
            warmup_laps: 1,
            start_s: 0.0,
            start_vx: None,
            mu: None,
            randomize_friction: false,
            lap_timeout: 120.0,
            std: StdConvention::Population,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LapRecord {
    pub lap: usize,
    pub lap_time: f64,
    pub telemetry: Vec<TelemetryRow>,
    /// The car left the track during this lap.
    pub violation: bool,
    pub mean_abs_d: f64,
    /// Controller wall time per control step [s].
    pub cpu_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRun {
    pub controller: String,
    pub seed: u64,
    pub laps: Vec<LapRecord>,
    /// Fewer laps than requested were completed.
    pub partial: bool,
    pub collision: bool,
    pub timed_out: bool,
    /// Every step including warm-up, for plotting.
    pub total_steps: usize,
}

impl EvalRun {
    pub fn complete(&self) -> bool {
        !self.partial
    }

    pub fn lap_times(&self) -> Vec<f64> {
        self.laps.iter().map(|l| l.lap_time).collect()
    }
}

/// Drive `opts.warmup_laps + opts.laps` laps and record the last `opts.laps`.
///
/// Lap boundaries come from the environment: progress crossing a multiple
/// of the raceline length measured from the start, with the crossing time
/// interpolated linearly within the control period. Rows of the crossing
/// step belong to the lap it closes. Stops early on collision, simulator
/// failure or timeout; such runs are flagged `partial`.
pub fn run_laps(circuit: Arc<Circuit>, params: &EnvParams, controller: &Controller, opts: &EvalOptions, seed: u64) -> Result<EvalRun, HarnessError> {
    let mut params = *params;
    let total_laps = opts.warmup_laps + opts.laps;
    let steps_per_lap = (opts.lap_timeout / params.env.dt_ctrl()).ceil() as usize;
    params.env.max_steps = steps_per_lap.saturating_mul(total_laps.max(1));
    let mut env = RacingEnv::new(circuit, params, seed)?;
    if let Controller::Rlpp(p) = controller {
        if p.obs_dim() != env.obs_dim() {
            return Err(SacError::Dimension { expected: env.obs_dim(), got: p.obs_dim() }.into());
        }
    }
    let mu = match opts.mu {
        Some(mu) => mu,
        None if opts.randomize_friction => randomize_friction(&params.friction, &mut ChaCha8Rng::seed_from_u64(seed)),
        None => params.friction.mu_nominal,
    };
    let vx = opts.start_vx.unwrap_or(params.env.v_warmstart);
    let mut obs = env.reset_with(ResetOptions { s: Some(opts.start_s), vx: Some(vx), mu: Some(mu) }).to_vec();

    let mut run =
        EvalRun { controller: controller.name().into(), seed, laps: Vec::new(), partial: false, collision: false, timed_out: false, total_steps: 0 };
    let mut rows = Vec::new();
    let mut cpu = Vec::new();
    let mut violation = false;
    let mut lap_steps = 0usize;
    let mut closed = 0usize;
    loop {
        let t0 = Instant::now();
        let action = match controller {
            Controller::Pp => {
                std::hint::black_box(env.pp_command());
                [0.0, 0.0]
            }
            Controller::Rlpp(p) => {
                std::hint::black_box(env.pp_command());
                p.act(&obs)?
            }
        };
        cpu.push(t0.elapsed().as_secs_f64());
        let res = env.step(action)?;
        run.total_steps += 1;
        lap_steps += 1;
        rows.push(TelemetryRow::new(env.steps(), &res.info, &res.reward));
        violation |= res.info.collision;
        obs.copy_from_slice(env.observation());

        if let Some(t) = res.info.lap_time {
            closed += 1;
            if closed > opts.warmup_laps {
                let mean_abs_d = rows.iter().map(|r: &TelemetryRow| r.d.abs()).sum::<f64>() / rows.len() as f64;
                run.laps.push(LapRecord {
                    lap: run.laps.len() + 1,
                    lap_time: t,
                    telemetry: std::mem::take(&mut rows),
                    violation,
                    mean_abs_d,
                    cpu_times: std::mem::take(&mut cpu),
                });
            }
            rows.clear();
            cpu.clear();
            violation = false;
            lap_steps = 0;
            if closed >= total_laps {
                break;
            }
        }
        if res.terminated || res.truncated {
            run.collision = res.info.collision;
            run.timed_out = res.truncated;
            break;
        }
        if lap_steps >= steps_per_lap {
            run.timed_out = true;
            break;
        }
    }
    run.partial = run.laps.len() < opts.laps;
    Ok(run)
}

/// Independent runs over several seeds, in seed order.
pub fn run_seeds(
    exec: Exec,
    circuit: &Arc<Circuit>,
    params: &EnvParams,
    controller: &Controller,
    opts: &EvalOptions,
    seeds: &[u64],
) -> Vec<Result<EvalRun, HarnessError>> {
    par::map(exec, seeds, |&s| run_laps(circuit.clone(), params, controller, opts, s))
}
