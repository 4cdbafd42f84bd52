//! Curvature-limited velocity profile with forward (acceleration) and
//! backward (braking) passes. A stand-in for an external raceline optimizer.

use serde::{Deserialize, Serialize};

use super::TrackError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileLimits {
    /// Lateral acceleration budget [m/s^2].
    pub a_lat_max: f64,
    /// Longitudinal acceleration budget [m/s^2].
    pub a_lon_max: f64,
    /// Braking deceleration budget [m/s^2].
    pub a_brake_max: f64,
    /// Absolute speed cap [m/s].
    pub v_cap: f64,
}

impl Default for ProfileLimits {
    fn default() -> Self {
        ProfileLimits { a_lat_max: 4.0, a_lon_max: 3.0, a_brake_max: 4.0, v_cap: 7.0 }
    }
}

impl ProfileLimits {
    pub fn validate(&self) -> Result<(), TrackError> {
        for (name, v) in [("a_lat_max", self.a_lat_max), ("a_lon_max", self.a_lon_max), ("a_brake_max", self.a_brake_max), ("v_cap", self.v_cap)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(TrackError::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Reference speed at every stored point.
///
/// `s` holds the arc position of each point; for closed paths the segment
/// from the last point back to the first has length `total_length - s_last`
/// and the profile is periodic.
pub fn generate_velocity_profile(s: &[f64], kappa: &[f64], total_length: f64, closed: bool, limits: &ProfileLimits) -> Result<Vec<f64>, TrackError> {
    limits.validate()?;
    let n = s.len();
    if n < 2 || kappa.len() != n {
        return Err(TrackError::InvalidArgument("need matching s and kappa with >= 2 points".into()));
    }
    let mut v: Vec<f64> = kappa
        .iter()
        .map(|&k| {
            let lat = if k.abs() > 0.0 { (limits.a_lat_max / k.abs()).sqrt() } else { f64::INFINITY };
            lat.min(limits.v_cap)
        })
        .collect();

    // Δs from point i to its successor
    let ds = |i: usize| if i + 1 < n { s[i + 1] - s[i] } else { total_length - s[n - 1] };

    if closed {
        // The global minimum is never raised by either pass, so starting the
        // sweeps there makes one lap sufficient for the periodic solution.
        let start = (0..n).min_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
        for k in 0..n {
            let i = (start + k) % n;
            let j = (i + 1) % n;
            v[j] = v[j].min((v[i] * v[i] + 2.0 * limits.a_lon_max * ds(i)).sqrt());
        }
        for k in 0..n {
            let j = (start + n - k) % n;
            let i = (j + n - 1) % n;
            v[i] = v[i].min((v[j] * v[j] + 2.0 * limits.a_brake_max * ds(i)).sqrt());
        }
    } else {
        for i in 0..n - 1 {
            v[i + 1] = v[i + 1].min((v[i] * v[i] + 2.0 * limits.a_lon_max * ds(i)).sqrt());
        }
        for i in (0..n - 1).rev() {
            v[i] = v[i].min((v[i + 1] * v[i + 1] + 2.0 * limits.a_brake_max * ds(i)).sqrt());
        }
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, h: f64) -> Vec<f64> {
        (0..n).map(|i| i as f64 * h).collect()
    }

    #[test]
    fn straight_hits_cap() {
        let s = grid(50, 0.2);
        let v = generate_velocity_profile(&s, &vec![0.0; 50], 10.0, true, &ProfileLimits { v_cap: 5.0, ..Default::default() }).unwrap();
        assert!(v.iter().all(|&x| x == 5.0));
    }

    #[test]
    fn constant_curvature_closed_form() {
        let s = grid(40, 0.1);
        let lim = ProfileLimits { a_lat_max: 4.0, v_cap: 100.0, ..Default::default() };
        let v = generate_velocity_profile(&s, &vec![0.5; 40], 4.0, true, &lim).unwrap();
        for x in v {
            assert!((x - 8f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn corner_step_respects_brake_and_accel_limits() {
        let n = 200;
        let h = 0.05;
        let s = grid(n, h);
        let kappa: Vec<f64> = (0..n).map(|i| if (80..120).contains(&i) { 1.0 } else { 0.0 }).collect();
        let lim = ProfileLimits { a_lat_max: 4.0, a_lon_max: 2.0, a_brake_max: 3.0, v_cap: 6.0 };
        for closed in [false, true] {
            let v = generate_velocity_profile(&s, &kappa, n as f64 * h, closed, &lim).unwrap();
            // brute-force feasibility on every consecutive pair
            for i in 0..n {
                let j = (i + 1) % n;
                if !closed && j == 0 {
                    continue;
                }
                let dv2 = v[j] * v[j] - v[i] * v[i];
                assert!(dv2 <= 2.0 * lim.a_lon_max * h + 1e-9, "accel at {i}");
                assert!(-dv2 <= 2.0 * lim.a_brake_max * h + 1e-9, "brake at {i}");
            }
            assert!(v[79] < 6.0 && v[79] > 2.0, "decelerates before the corner");
            assert!(v[100] <= 2.0 + 1e-12);
            assert!(v.iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn rejects_bad_limits() {
        let r = generate_velocity_profile(&[0.0, 1.0], &[0.0, 0.0], 1.0, false, &ProfileLimits { a_lat_max: 0.0, ..Default::default() });
        assert!(r.is_err());
    }
}
