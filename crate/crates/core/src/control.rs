//! Pure Pursuit baseline and the residual composition `u = clamp(u_pp + u_rl)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{ActuatorLimits, ControlInput, VehicleParams, VehicleState};
use crate::track::{FrenetPose, Raceline};

#[derive(Debug, Error, PartialEq)]
pub enum ControlError {
    #[error("residual action component {index} = {value} outside [-1, 1]")]
    ActionOutOfRange { index: usize, value: f64 },
    #[error("invalid controller config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpConfig {
    /// Lookahead distance [m].
    pub d_la: f64,
    /// Velocity gain applied to the raceline reference speed.
    pub alpha_v: f64,
}

impl Default for PpConfig {
    fn default() -> Self {
        PpConfig { d_la: 1.2, alpha_v: 0.8 }
    }
}

impl PpConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        if !(self.d_la > 0.0) || !self.d_la.is_finite() {
            return Err(ControlError::InvalidConfig(format!("d_la must be positive, got {}", self.d_la)));
        }
        if !(self.alpha_v > 0.0 && self.alpha_v <= 1.5) {
            return Err(ControlError::InvalidConfig(format!("alpha_v must lie in (0, 1.5], got {}", self.alpha_v)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResidualConfig {
    pub alpha_rl: f64,
    /// Steering channel scale [rad].
    pub c_delta: f64,
    /// Speed channel scale [m/s].
    pub c_v: f64,
}

impl Default for ResidualConfig {
    fn default() -> Self {
        ResidualConfig { alpha_rl: 0.55, c_delta: 0.4, c_v: 1.0 }
    }
}

impl ResidualConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        for (name, v) in [("alpha_rl", self.alpha_rl), ("c_delta", self.c_delta), ("c_v", self.c_v)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(ControlError::InvalidConfig(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Pure Pursuit steering for a lookahead point at body-frame lateral offset `p_x`.
pub fn pp_steering(p_x: f64, d_la: f64, wheelbase: f64) -> f64 {
    (2.0 * wheelbase * p_x / (d_la * d_la)).atan()
}

/// Pure Pursuit command anchored at the rear axle.
///
/// The lookahead point lies `d_la` further along the raceline than the
/// projection of the rear axle; the speed is `alpha_v` times the reference
/// speed at that projection.
pub fn pp_command(state: &VehicleState, raceline: &Raceline, cfg: &PpConfig, params: &VehicleParams) -> ControlInput {
    let (sp, cp) = state.phi.sin_cos();
    let rx = state.x - params.lr * cp;
    let ry = state.y - params.lr * sp;
    let proj = raceline.cartesian_to_frenet(rx, ry);
    let (lx, ly, _) = raceline.frenet_to_cartesian(FrenetPose { s: proj.s + cfg.d_la, d: 0.0 });
    let (dx, dy) = (lx - rx, ly - ry);
    let p_x = -sp * dx + cp * dy;
    ControlInput { delta: pp_steering(p_x, cfg.d_la, params.wheelbase()), v: cfg.alpha_v * raceline.v_ref_at(proj.s) }
}

/// `(d_delta, d_v) = alpha_rl * (c_delta * u[0], c_v * u[1])`.
pub fn residual_scale(u_nn: [f64; 2], cfg: &ResidualConfig) -> Result<[f64; 2], ControlError> {
    for (index, &value) in u_nn.iter().enumerate() {
        if !(value.abs() <= 1.0) {
            return Err(ControlError::ActionOutOfRange { index, value });
        }
    }
    Ok([cfg.alpha_rl * cfg.c_delta * u_nn[0], cfg.alpha_rl * cfg.c_v * u_nn[1]])
}

/// Sum of baseline and residual, clamped to actuator limits.
pub fn compose_command(u_pp: ControlInput, u_rl: [f64; 2], limits: &ActuatorLimits) -> ControlInput {
    ControlInput { delta: u_pp.delta + u_rl[0], v: u_pp.v + u_rl[1] }.clamped(limits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Simulator, VehicleModel};
    use crate::track::{synthetic_straight, ProfileLimits};
    use proptest::prelude::*;

    fn straight_raceline(v_ref: f64) -> Raceline {
        let t = synthetic_straight(120.0, 0.25, 1.0);
        let rl = Raceline::from_centerline(&t, &ProfileLimits::default()).unwrap();
        let n = rl.points().len();
        rl.with_velocity(vec![v_ref; n]).unwrap()
    }

    #[test]
    fn aligned_on_line() {
        let rl = straight_raceline(3.0);
        let p = VehicleParams::default();
        let st = VehicleState { x: 10.0, vx: 2.0, ..Default::default() };
        let u = pp_command(&st, &rl, &PpConfig::default(), &p);
        assert_eq!(u.delta, 0.0);
        assert!((u.v - 0.8 * 3.0).abs() < 1e-12);
    }

    #[test]
    fn steering_formula_value() {
        let d = pp_steering(0.3, 1.2, 0.325);
        assert!((d - (0.195f64 / 1.44).atan()).abs() < 1e-15);
        assert!((d - 0.1346).abs() < 1e-4);
    }

    #[test]
    fn left_offset_steers_right() {
        let rl = straight_raceline(3.0);
        let st = VehicleState { x: 10.0, y: 0.2, ..Default::default() };
        let u = pp_command(&st, &rl, &PpConfig::default(), &VehicleParams::default());
        assert!(u.delta < 0.0);
        // lookahead point sits 0.2 m to the right of the rear axle
        assert!((u.delta - pp_steering(-0.2, 1.2, 0.325)).abs() < 1e-9);
    }

    #[test]
    fn residual_examples() {
        let cfg = ResidualConfig::default();
        assert_eq!(residual_scale([0.0, 0.0], &cfg).unwrap(), [0.0, 0.0]);
        assert!((residual_scale([1.0, 0.0], &cfg).unwrap()[0] - 0.22).abs() < 1e-15);
        let off = ResidualConfig { alpha_rl: 0.0, ..cfg };
        assert_eq!(residual_scale([0.7, -0.3], &off).unwrap(), [0.0, -0.0]);
        assert!(matches!(residual_scale([1.2, 0.0], &cfg), Err(ControlError::ActionOutOfRange { index: 0, .. })));
        assert!(residual_scale([0.0, f64::NAN], &cfg).is_err());
    }

    #[test]
    fn compose_examples() {
        let lim = ActuatorLimits::default();
        let pp = ControlInput { delta: 0.35, v: 3.0 };
        assert_eq!(compose_command(pp, [0.0, 0.0], &lim), pp);
        assert_eq!(compose_command(pp, [0.22, 0.0], &lim).delta, 0.4);
        assert_eq!(compose_command(pp, [0.0, -0.5], &lim).v, 2.5);
    }

    #[test]
    fn config_validation() {
        assert!(PpConfig { alpha_v: 1.6, ..Default::default() }.validate().is_err());
        assert!(PpConfig { d_la: 0.0, ..Default::default() }.validate().is_err());
        assert!(ResidualConfig { alpha_rl: -0.1, ..Default::default() }.validate().is_err());
    }

    proptest! {
        #[test]
        fn zero_gain_is_bitwise_pp(
            x in 0.0f64..100.0, y in -0.8f64..0.8, phi in -0.5f64..0.5, vx in 0.0f64..6.0,
            a0 in -1.0f64..1.0, a1 in -1.0f64..1.0,
        ) {
            let rl = straight_raceline(4.0);
            let lim = ActuatorLimits::default();
            let st = VehicleState { x, y, phi, vx, ..Default::default() };
            let pp = pp_command(&st, &rl, &PpConfig::default(), &VehicleParams::default());
            let cfg = ResidualConfig { alpha_rl: 0.0, ..Default::default() };
            let u = compose_command(pp, residual_scale([a0, a1], &cfg).unwrap(), &lim);
            let base = pp.clamped(&lim);
            prop_assert_eq!(u.delta.to_bits(), base.delta.to_bits());
            prop_assert_eq!(u.v.to_bits(), base.v.to_bits());
        }

        #[test]
        fn steering_odd_and_monotone(p in 0.001f64..2.0, q in 0.001f64..2.0, d1 in 0.3f64..3.0, d2 in 0.3f64..3.0) {
            prop_assert_eq!(pp_steering(-p, d1, 0.325), -pp_steering(p, d1, 0.325));
            let (lo, hi) = if p < q { (p, q) } else { (q, p) };
            if lo < hi {
                prop_assert!(pp_steering(lo, d1, 0.325) < pp_steering(hi, d1, 0.325));
            }
            let (short, long) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
            if short < long {
                prop_assert!(pp_steering(p, long, 0.325).abs() < pp_steering(p, short, 0.325).abs());
            }
        }
    }

    #[test]
    fn closed_loop_regulation_on_a_straight() {
        let rl = straight_raceline(2.5);
        let mut sim = Simulator::new(VehicleModel::default(), 0.5, 0.025, 0.005).unwrap();
        sim.reset(VehicleState { x: 2.0, y: 0.3, vx: 2.0, ..Default::default() }, 0.5);
        let cfg = PpConfig::default();
        let lim = ActuatorLimits::default();
        let mut settled_at = None;
        let mut max_late = 0.0f64;
        for k in 0..1200 {
            let u = pp_command(&sim.state, &rl, &cfg, &sim.model.vehicle);
            let st = sim.step(compose_command(u, [0.0, 0.0], &lim)).unwrap();
            let d = rl.cartesian_to_frenet(st.x, st.y).d.abs();
            let t = (k + 1) as f64 * 0.025;
            if settled_at.is_none() && d < 0.05 {
                settled_at = Some(t);
            }
            if t > 5.0 {
                max_late = max_late.max(d);
            }
        }
        assert!(settled_at.unwrap() <= 5.0, "{settled_at:?}");
        assert!(max_late < 0.05, "{max_late}");
    }
}
