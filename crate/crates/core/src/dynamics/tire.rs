use super::{ActuatorLimits, PacejkaCoeffs, VehicleParams, VehicleState};

/// Front and rear slip angles `(alpha_f, alpha_r)` [rad].
///
/// The longitudinal speed in the denominator is floored at `v_blend_lo`;
/// below that speed the integrator relies on the kinematic model anyway.
pub fn slip_angles(state: &VehicleState, delta: f64, params: &VehicleParams, limits: &ActuatorLimits) -> (f64, f64) {
    let vx = state.vx.max(limits.v_blend_lo);
    let alpha_f = ((state.vy + state.r * params.lf) / vx).atan() - delta;
    let alpha_r = ((state.vy - state.r * params.lr) / vx).atan();
    (alpha_f, alpha_r)
}

/// Pacejka lateral force `mu * F_z * D * sin(C * atan(B a - E (B a - atan(B a))))`.
pub fn lateral_tire_force(alpha: f64, fz: f64, mu: f64, tire: &PacejkaCoeffs) -> f64 {
    let ba = tire.b * alpha;
    mu * fz * tire.d * (tire.c * (ba - tire.e * (ba - ba.atan())).atan()).sin()
}
