//! Residual reinforcement-learning racing lab.
//!
//! The crate bundles everything needed to train and evaluate a residual
//! controller on top of Pure Pursuit:
//!
//! * [`track`]: closed-loop track and raceline geometry, Frenet conversions,
//!   CSV ingestion and a curvature-limited velocity profile generator.
//! * [`dynamics`]: single-track vehicle model with Pacejka lateral forces,
//!   actuator models and an RK4 integrator.
//! * [`control`]: Pure Pursuit and the residual composition `u = u_pp + u_rl`.
//! * [`env`]: observation, reward, curriculum and episode lifecycle.
//! * [`sac`]: a from-scratch Soft Actor-Critic with manual backprop.
//! * [`harness`]: multi-lap evaluation, lap statistics and artifact export.
//! * [`config`]: the declarative run configuration used by the CLI.
//!
//! The `parallel` feature (on by default) routes the data-parallel inner
//! loops through rayon; with it disabled the same code runs sequentially.

// `!(x > 0.0)` rejects NaN on purpose; numeric kernels index several
// buffers in lockstep.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod control;
pub mod dynamics;
pub mod env;
pub mod harness;
pub mod par;
pub mod sac;
pub mod track;

pub use config::RunConfig;
pub use control::{PpConfig, ResidualConfig};
pub use dynamics::{ActuatorLimits, ControlInput, FrictionModel, TireParams, VehicleModel, VehicleParams, VehicleState};
pub use track::{Circuit, FrenetPose, Raceline, TrackLayout};

/// Wrap an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w += 2.0 * PI;
    }
    w
}
