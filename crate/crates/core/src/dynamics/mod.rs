//! Single-track vehicle model with Pacejka lateral tire forces.
//!
//! Inputs are a steering reference and a speed command; an internal P
//! controller turns the speed error into a longitudinal acceleration. The
//! state is integrated with fixed-step RK4 while commands are held over the
//! control period.

mod model;
mod sim;
mod tire;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use model::{derivatives, dynamic_weight, VehicleModel};
pub use sim::{step_integrate, Simulator};
pub use tire::{lateral_tire_force, slip_angles};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("non-finite vehicle state after integration")]
    NonFinite,
    #[error("control period {dt_ctrl} is not an integer multiple of the physics step {dt_phys}")]
    StepMismatch { dt_ctrl: f64, dt_phys: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// `(X, Y, phi, vx, vy, r)`: position, heading, body-frame velocities and yaw rate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub phi: f64,
    pub vx: f64,
    pub vy: f64,
    pub r: f64,
}

impl VehicleState {
    pub fn to_array(self) -> [f64; 6] {
        [self.x, self.y, self.phi, self.vx, self.vy, self.r]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        VehicleState { x: a[0], y: a[1], phi: a[2], vx: a[3], vy: a[4], r: a[5] }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Speed magnitude of the centre of gravity.
    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleParams {
    /// Mass [kg].
    pub m: f64,
    /// Yaw inertia [kg m^2].
    pub iz: f64,
    /// CoG to front axle [m].
    pub lf: f64,
    /// CoG to rear axle [m].
    pub lr: f64,
    /// Gravity [m/s^2].
    pub g: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams { m: 3.56, iz: 0.0627, lf: 0.174, lr: 0.151, g: 9.81 }
    }
}

impl VehicleParams {
    pub fn wheelbase(&self) -> f64 {
        self.lf + self.lr
    }

    pub fn validate(&self) -> Result<(), SimError> {
        positive(&[("m", self.m), ("iz", self.iz), ("lf", self.lf), ("lr", self.lr), ("g", self.g)])
    }
}

/// Static axle loads `(F_zf, F_zr)` [N]; no load transfer.
pub fn axle_loads(p: &VehicleParams) -> (f64, f64) {
    let w = p.m * p.g;
    let l = p.wheelbase();
    (w * p.lr / l, w * p.lf / l)
}

/// Pacejka constants for one axle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacejkaCoeffs {
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TireParams {
    pub front: PacejkaCoeffs,
    pub rear: PacejkaCoeffs,
}

impl Default for TireParams {
    fn default() -> Self {
        TireParams { front: PacejkaCoeffs { b: 7.67, c: 0.48, d: 2.00, e: 1.10 }, rear: PacejkaCoeffs { b: 20.00, c: 1.50, d: 0.65, e: 0.00 } }
    }
}

impl TireParams {
    pub fn validate(&self) -> Result<(), SimError> {
        positive(&[("front.b", self.front.b), ("front.d", self.front.d), ("rear.b", self.rear.b), ("rear.d", self.rear.d)])
    }
}

/// Nominal friction with per-episode additive Gaussian randomization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrictionModel {
    pub mu_nominal: f64,
    pub sigma: f64,
    pub mu_min: f64,
    pub mu_max: f64,
}

impl Default for FrictionModel {
    fn default() -> Self {
        FrictionModel { mu_nominal: 0.5, sigma: 0.15, mu_min: 0.2, mu_max: 0.8 }
    }
}

impl FrictionModel {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.mu_nominal > 0.0) || !(self.sigma >= 0.0) || !(self.mu_min > 0.0) {
            return Err(SimError::InvalidParameter("friction: need mu_nominal > 0, sigma >= 0, mu_min > 0".into()));
        }
        if !(self.mu_min <= self.mu_nominal && self.mu_nominal <= self.mu_max) {
            return Err(SimError::InvalidParameter("friction: need mu_min <= mu_nominal <= mu_max".into()));
        }
        Ok(())
    }
}

/// `clamp(mu_nominal + eps, mu_min, mu_max)` with `eps ~ N(0, sigma)`.
pub fn randomize_friction<R: Rng + ?Sized>(model: &FrictionModel, rng: &mut R) -> f64 {
    if model.sigma == 0.0 {
        return model.mu_nominal;
    }
    let eps = Normal::new(0.0, model.sigma).expect("sigma validated").sample(rng);
    (model.mu_nominal + eps).clamp(model.mu_min, model.mu_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActuatorLimits {
    /// Steering angle limit [rad].
    pub delta_max: f64,
    /// Steering rate limit [rad/s].
    pub delta_rate_max: f64,
    /// Acceleration limit [m/s^2].
    pub a_max: f64,
    /// Braking limit [m/s^2].
    pub a_brake_max: f64,
    /// Speed command limit [m/s].
    pub v_max: f64,
    /// Speed P gain [1/s].
    pub kp_speed: f64,
    /// Below this speed the lateral dynamics are purely kinematic [m/s].
    pub v_blend_lo: f64,
    /// Above this speed the lateral dynamics are purely dynamic [m/s].
    pub v_blend_hi: f64,
}

impl Default for ActuatorLimits {
    fn default() -> Self {
        ActuatorLimits {
            delta_max: 0.4,
            delta_rate_max: 3.2,
            a_max: 6.0,
            a_brake_max: 6.0,
            v_max: 8.0,
            kp_speed: 2.0,
            v_blend_lo: 0.5,
            v_blend_hi: 1.0,
        }
    }
}

impl ActuatorLimits {
    pub fn validate(&self) -> Result<(), SimError> {
        positive(&[
            ("delta_max", self.delta_max),
            ("delta_rate_max", self.delta_rate_max),
            ("a_max", self.a_max),
            ("a_brake_max", self.a_brake_max),
            ("v_max", self.v_max),
            ("kp_speed", self.kp_speed),
            ("v_blend_lo", self.v_blend_lo),
            ("v_blend_hi", self.v_blend_hi),
        ])?;
        if self.v_blend_lo >= self.v_blend_hi {
            return Err(SimError::InvalidParameter("v_blend_lo must be below v_blend_hi".into()));
        }
        Ok(())
    }
}

/// Steering angle [rad] and speed command [m/s].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub delta: f64,
    pub v: f64,
}

impl ControlInput {
    pub fn clamped(self, limits: &ActuatorLimits) -> Self {
        ControlInput { delta: self.delta.clamp(-limits.delta_max, limits.delta_max), v: self.v.clamp(0.0, limits.v_max) }
    }
}

/// Internal P speed controller: `clamp(kp * (v_cmd - vx), -a_brake_max, a_max)`.
pub fn speed_controller(v_cmd: f64, vx: f64, limits: &ActuatorLimits) -> f64 {
    (limits.kp_speed * (v_cmd - vx)).clamp(-limits.a_brake_max, limits.a_max)
}

fn positive(fields: &[(&str, f64)]) -> Result<(), SimError> {
    for (name, v) in fields {
        if !(*v > 0.0) || !v.is_finite() {
            return Err(SimError::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(())
}
