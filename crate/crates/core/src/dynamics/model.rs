use serde::{Deserialize, Serialize};

use super::{axle_loads, lateral_tire_force, slip_angles, ActuatorLimits, TireParams, VehicleParams, VehicleState};

/// Relaxation time of the low-speed kinematic lateral model [s].
pub const KINEMATIC_TAU: f64 = 0.05;

/// Vehicle, tires and actuators bundled for integration.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleModel {
    pub vehicle: VehicleParams,
    pub tires: TireParams,
    pub limits: ActuatorLimits,
}

impl VehicleModel {
    pub fn validate(&self) -> Result<(), super::SimError> {
        self.vehicle.validate()?;
        self.tires.validate()?;
        self.limits.validate()
    }
}

/// Dynamic single-track derivatives for a held steering angle `delta` and
/// longitudinal acceleration `a`.
pub fn derivatives(model: &VehicleModel, s: &VehicleState, delta: f64, a: f64, mu: f64) -> [f64; 6] {
    let p = &model.vehicle;
    let (fzf, fzr) = axle_loads(p);
    let (af, ar) = slip_angles(s, delta, p, &model.limits);
    // slip angles are measured from wheel heading to velocity; the tire
    // force acts against them
    let fyf = -lateral_tire_force(af, fzf, mu, &model.tires.front);
    let fyr = -lateral_tire_force(ar, fzr, mu, &model.tires.rear);
    let (sp, cp) = s.phi.sin_cos();
    let (sd, cd) = delta.sin_cos();
    [
        s.vx * cp - s.vy * sp,
        s.vx * sp + s.vy * cp,
        s.r,
        a + (-fyf * sd + p.m * s.vy * s.r) / p.m,
        (fyr + fyf * cd) / p.m - s.vx * s.r,
        (fyf * p.lf * cd - fyr * p.lr) / p.iz,
    ]
}

/// Kinematic bicycle derivatives with lateral states relaxed toward the
/// no-slip solution; well-posed at zero speed.
pub(crate) fn kinematic_derivatives(model: &VehicleModel, s: &VehicleState, delta: f64, a: f64) -> [f64; 6] {
    let p = &model.vehicle;
    let l = p.wheelbase();
    let td = delta.tan();
    let r_kin = s.vx * td / l;
    let vy_kin = p.lr * r_kin;
    let (sp, cp) = s.phi.sin_cos();
    [
        s.vx * cp - s.vy * sp,
        s.vx * sp + s.vy * cp,
        s.r,
        a,
        p.lr * a * td / l + (vy_kin - s.vy) / KINEMATIC_TAU,
        a * td / l + (r_kin - s.r) / KINEMATIC_TAU,
    ]
}

/// Weight of the dynamic model: 0 below `v_blend_lo`, 1 above `v_blend_hi`.
pub fn dynamic_weight(vx: f64, limits: &ActuatorLimits) -> f64 {
    ((vx - limits.v_blend_lo) / (limits.v_blend_hi - limits.v_blend_lo)).clamp(0.0, 1.0)
}

/// Blended derivative used by the integrator.
pub(crate) fn blended_derivatives(model: &VehicleModel, s: &VehicleState, delta: f64, a: f64, mu: f64) -> [f64; 6] {
    let w = dynamic_weight(s.vx, &model.limits);
    if w >= 1.0 {
        return derivatives(model, s, delta, a, mu);
    }
    let kin = kinematic_derivatives(model, s, delta, a);
    if w <= 0.0 {
        return kin;
    }
    let dynm = derivatives(model, s, delta, a, mu);
    std::array::from_fn(|i| w * dynm[i] + (1.0 - w) * kin[i])
}
