//! Built-in synthetic layouts.

use std::f64::consts::PI;

use super::{TrackLayout, TrackPoint};
use crate::wrap_angle;

const STRAIGHT: f64 = 10.0;
const RADIUS: f64 = 3.0;

/// Clockwise oval: two 10 m straights joined by radius-3 m semicircles,
/// total length `20 + 6 pi`. The start line sits at the middle of the
/// straight through the origin, heading +x. Stored `s`, heading and
/// curvature are the analytic values; `spacing` is the target point pitch.
pub fn synthetic_oval(spacing: f64, half_width: f64) -> TrackLayout {
    assert!(spacing > 0.0 && half_width > 0.0);
    let half = STRAIGHT / 2.0;
    let n_half = (half / spacing).round().max(1.0) as usize;
    let n_full = 2 * n_half;
    let arc_len = PI * RADIUS;
    let n_arc = (arc_len / spacing).ceil().max(2.0) as usize;
    let kappa_arc = -1.0 / RADIUS;

    let mut pts: Vec<TrackPoint> = Vec::new();
    let mut push = |s: f64, x: f64, y: f64, psi: f64, kappa: f64| {
        pts.push(TrackPoint { s, x, y, psi: wrap_angle(psi), kappa, w_left: half_width, w_right: half_width });
    };

    let mut s0 = 0.0;
    for i in 0..n_half {
        let x = half * i as f64 / n_half as f64;
        push(s0 + x, x, 0.0, 0.0, 0.0);
    }
    s0 += half;
    for j in 0..n_arc {
        let f = j as f64 / n_arc as f64;
        let th = PI / 2.0 - PI * f;
        push(s0 + arc_len * f, half + RADIUS * th.cos(), -RADIUS + RADIUS * th.sin(), th - PI / 2.0, kappa_arc);
    }
    s0 += arc_len;
    for i in 0..n_full {
        let f = i as f64 / n_full as f64;
        push(s0 + STRAIGHT * f, half - STRAIGHT * f, -2.0 * RADIUS, PI, if i == 0 { kappa_arc } else { 0.0 });
    }
    s0 += STRAIGHT;
    for j in 0..n_arc {
        let f = j as f64 / n_arc as f64;
        let th = -PI / 2.0 - PI * f;
        push(s0 + arc_len * f, -half + RADIUS * th.cos(), -RADIUS + RADIUS * th.sin(), th - PI / 2.0, kappa_arc);
    }
    s0 += arc_len;
    for i in 0..n_half {
        let f = i as f64 / n_half as f64;
        push(s0 + half * f, -half + half * f, 0.0, 0.0, if i == 0 { kappa_arc } else { 0.0 });
    }
    TrackLayout::from_points(pts, true).expect("synthetic oval is valid")
}

/// Open straight track along +x from the origin.
pub fn synthetic_straight(length: f64, spacing: f64, half_width: f64) -> TrackLayout {
    let n = (length / spacing).round().max(1.0) as usize;
    let pts = (0..=n)
        .map(|i| {
            let x = length * i as f64 / n as f64;
            TrackPoint { s: x, x, y: 0.0, psi: 0.0, kappa: 0.0, w_left: half_width, w_right: half_width }
        })
        .collect();
    TrackLayout::from_points(pts, false).expect("synthetic straight is valid")
}
