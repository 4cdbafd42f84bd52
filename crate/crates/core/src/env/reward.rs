use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// How deviation thresholds are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Gating {
    /// `x * [x > tau]`
    #[default]
    MagnitudeGated,
    /// `[x > tau]`
    LiteralIndicator,
}

/// Which speed enters the speed reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpeedMeasure {
    #[default]
    Magnitude,
    Vx,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    pub alpha_dev: f64,
    /// Lateral deviation threshold [m].
    pub tau_dev: f64,
    pub alpha_heading: f64,
    /// Heading error threshold [rad].
    pub tau_psi: f64,
    /// Heading error normalization [rad].
    pub psi_max: f64,
    /// Speed normalization [m/s].
    pub v_max: f64,
    /// Control period [s]; also the environment step.
    pub t_sim: f64,
    pub gating: Gating,
    pub speed: SpeedMeasure,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            alpha_dev: 1.0,
            tau_dev: 0.1,
            alpha_heading: 0.25,
            tau_psi: 0.0,
            psi_max: PI,
            v_max: 8.0,
            t_sim: 0.025,
            gating: Gating::MagnitudeGated,
            speed: SpeedMeasure::Magnitude,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [("alpha_dev", self.alpha_dev), ("tau_dev", self.tau_dev), ("alpha_heading", self.alpha_heading), ("tau_psi", self.tau_psi)]
        {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(format!("reward.{name} must be >= 0, got {v}"));
            }
        }
        for (name, v) in [("psi_max", self.psi_max), ("v_max", self.v_max), ("t_sim", self.t_sim)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(format!("reward.{name} must be > 0, got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_adv: f64,
    pub r_speed: f64,
    pub r_dev: f64,
    pub r_heading: f64,
    pub r_coll: f64,
    pub r_pos: f64,
    pub r_tot: f64,
}

impl RewardBreakdown {
    /// Recompute the total from the stored components.
    pub fn recomputed_total(&self) -> f64 {
        let r_pos = self.r_adv + self.r_speed;
        r_pos + r_pos * (self.r_dev + self.r_heading) + self.r_coll
    }
}

/// Per-step quantities the reward depends on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardInputs {
    /// Unwrapped advancement along the raceline [m].
    pub ds: f64,
    pub d: f64,
    pub delta_psi: f64,
    pub vx: f64,
    pub vy: f64,
    /// Corridor width at the current position [m].
    pub w_track: f64,
    pub collision: bool,
}

fn gate(x: f64, tau: f64, mode: Gating) -> f64 {
    if x > tau {
        match mode {
            Gating::MagnitudeGated => x,
            Gating::LiteralIndicator => 1.0,
        }
    } else {
        0.0
    }
}

pub fn compute_reward(inp: &RewardInputs, cfg: &RewardConfig) -> RewardBreakdown {
    let v = match cfg.speed {
        SpeedMeasure::Magnitude => inp.vx.hypot(inp.vy),
        SpeedMeasure::Vx => inp.vx,
    };
    let r_adv = inp.ds / (cfg.v_max * cfg.t_sim);
    let r_speed = v / cfg.v_max;
    let r_dev = -cfg.alpha_dev * gate(inp.d.abs(), cfg.tau_dev, cfg.gating) / inp.w_track;
    let r_heading = -cfg.alpha_heading * gate(inp.delta_psi.abs(), cfg.tau_psi, cfg.gating) / cfg.psi_max;
    let r_coll = if inp.collision { -1.0 } else { 0.0 };
    let r_pos = r_adv + r_speed;
    RewardBreakdown { r_adv, r_speed, r_dev, r_heading, r_coll, r_pos, r_tot: r_pos + r_pos * (r_dev + r_heading) + r_coll }
}
