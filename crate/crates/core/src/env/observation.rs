use serde::{Deserialize, Serialize};

use crate::dynamics::VehicleState;
use crate::track::Circuit;
use crate::wrap_angle;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObservationConfig {
    /// Waypoints per boundary.
    pub n: usize,
    /// Waypoint spacing [m].
    pub spacing: f64,
}

impl Default for ObservationConfig {
    fn default() -> Self {
        ObservationConfig { n: 20, spacing: 0.5 }
    }
}

impl ObservationConfig {
    pub fn dim(&self) -> usize {
        5 + 6 * self.n
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.n == 0 {
            return Err("observation.n must be >= 1".into());
        }
        if !(self.spacing > 0.0) || !self.spacing.is_finite() {
            return Err(format!("observation.spacing must be > 0, got {}", self.spacing));
        }
        Ok(())
    }
}

/// Fill `out` (length `5 + 6N`) with `(d, delta_psi, vx, vy, r)` followed by
/// the reference, left and right waypoints in the body frame.
///
/// `scratch` must hold `3N` points. Returns the raceline pose `(s, d, delta_psi)`.
pub fn build_observation(
    state: &VehicleState,
    circuit: &Circuit,
    cfg: &ObservationConfig,
    scratch: &mut [[f64; 2]],
    out: &mut [f64],
) -> (f64, f64, f64) {
    debug_assert_eq!(out.len(), cfg.dim());
    debug_assert_eq!(scratch.len(), 3 * cfg.n);
    let pose = circuit.project(state.x, state.y);
    let delta_psi = wrap_angle(state.phi - circuit.raceline().heading_at(pose.s));
    out[0] = pose.d;
    out[1] = delta_psi;
    out[2] = state.vx;
    out[3] = state.vy;
    out[4] = state.r;
    circuit.fill_forward_waypoints(pose.s, cfg.spacing, scratch);
    let (sp, cp) = state.phi.sin_cos();
    for (k, p) in scratch.iter().enumerate() {
        let (dx, dy) = (p[0] - state.x, p[1] - state.y);
        out[5 + 2 * k] = cp * dx + sp * dy;
        out[6 + 2 * k] = -sp * dx + cp * dy;
    }
    (pose.s, pose.d, delta_psi)
}

/// Allocating convenience wrapper around [`build_observation`].
pub fn observation(state: &VehicleState, circuit: &Circuit, cfg: &ObservationConfig) -> Vec<f64> {
    let mut scratch = vec![[0.0; 2]; 3 * cfg.n];
    let mut out = vec![0.0; cfg.dim()];
    build_observation(state, circuit, cfg, &mut scratch, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::track::{synthetic_oval, synthetic_straight, ProfileLimits, TrackLayout, TrackPoint};
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn default_dimension() {
        assert_eq!(ObservationConfig::default().dim(), 125);
        let c = Circuit::with_generated_raceline(synthetic_oval(0.1, 0.6), &ProfileLimits::default()).unwrap();
        let o = observation(&VehicleState { vx: 1.0, ..Default::default() }, &c, &ObservationConfig::default());
        assert_eq!(o.len(), 125);
    }

    #[test]
    fn at_rest_on_straight_centerline() {
        let c = Circuit::with_generated_raceline(synthetic_straight(50.0, 0.25, 0.8), &ProfileLimits::default()).unwrap();
        let cfg = ObservationConfig { n: 5, spacing: 0.5 };
        let o = observation(&VehicleState { x: 3.0, ..Default::default() }, &c, &cfg);
        assert!(o[..5].iter().all(|&v| v == 0.0), "{:?}", &o[..5]);
        for k in 0..5 {
            assert!((o[5 + 2 * k] - 0.5 * k as f64).abs() < 1e-12);
            assert!(o[6 + 2 * k].abs() < 1e-12);
            // left bound in +y, right bound in -y
            assert!((o[5 + 2 * (5 + k) + 1] - 0.8).abs() < 1e-12);
            assert!((o[5 + 2 * (10 + k) + 1] + 0.8).abs() < 1e-12);
        }
    }

    fn rigid(track: &TrackLayout, th: f64, tx: f64, ty: f64) -> TrackLayout {
        let (s, c) = th.sin_cos();
        let pts = track
            .points()
            .iter()
            .map(|p| TrackPoint { x: c * p.x - s * p.y + tx, y: s * p.x + c * p.y + ty, psi: wrap_angle(p.psi + th), ..*p })
            .collect();
        TrackLayout::from_points(pts, track.closed()).unwrap()
    }

    #[test]
    fn rigid_motion_invariance() {
        let base = synthetic_oval(0.1, 0.6);
        let cfg = ObservationConfig::default();
        let car = VehicleState { x: 4.1, y: -0.2, phi: -0.3, vx: 2.5, vy: 0.1, r: -0.4 };
        let c0 = Circuit::with_generated_raceline(base.clone(), &ProfileLimits::default()).unwrap();
        let o0 = observation(&car, &c0, &cfg);
        for (th, tx, ty) in [(FRAC_PI_2, 0.0, 0.0), (1.234, 7.0, -3.5), (-2.9, -40.0, 12.0)] {
            let c1 = Circuit::with_generated_raceline(rigid(&base, th, tx, ty), &ProfileLimits::default()).unwrap();
            let (s, co) = th.sin_cos();
            let moved = VehicleState { x: co * car.x - s * car.y + tx, y: s * car.x + co * car.y + ty, phi: car.phi + th, ..car };
            let o1 = observation(&moved, &c1, &cfg);
            let err = o0.iter().zip(&o1).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-9, "rotation {th}: {err}");
        }
    }
}
