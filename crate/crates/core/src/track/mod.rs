//! Track and raceline representation.
//!
//! A [`TrackLayout`] is a centerline with left/right half-widths. A
//! [`Raceline`] is the reference trajectory the controllers follow, with its
//! own arc-length parametrization and velocity profile. A [`Circuit`] pairs
//! the two and precomputes the corridor half-widths relative to the raceline,
//! so every per-step query is a cheap interpolation in raceline `s`.

mod io;
mod path;
mod profile;
mod synthetic;

use std::path::PathBuf;

use thiserror::Error;

pub use io::{load_raceline, load_track, read_raceline, read_track, write_raceline, write_track};
pub use path::RefPath;
pub use profile::{generate_velocity_profile, ProfileLimits};
pub use synthetic::{synthetic_oval, synthetic_straight};

use crate::wrap_angle;

#[derive(Debug, Error)]
pub enum TrackError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("parse error at record {record}: {msg}")]
    Parse { record: usize, msg: String },
    #[error("non-monotone s at point {index}")]
    NonMonotoneS { index: usize },
    #[error("non-positive width at point {index}")]
    NonPositiveWidth { index: usize },
    #[error("non-finite value at point {index}")]
    NonFinite { index: usize },
    #[error("open loop: closing gap {gap:.4} m is not a plausible segment")]
    OpenLoop { gap: f64 },
    #[error("first point duplicated at the end of a closed track")]
    DuplicateClosingPoint,
    #[error("need at least {min} points, got {got}")]
    TooFewPoints { min: usize, got: usize },
    #[error("non-positive reference speed at point {index}")]
    NonPositiveSpeed { index: usize },
    #[error("raceline point {index} lies outside the track corridor (d = {d:.3} m)")]
    OutsideCorridor { index: usize, d: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// One stored centerline sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint {
    pub s: f64,
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub kappa: f64,
    pub w_left: f64,
    pub w_right: f64,
}

/// Arc position and signed lateral offset (positive left).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrenetPose {
    pub s: f64,
    pub d: f64,
}

/// Closed (or open) centerline with corridor half-widths.
#[derive(Debug, Clone)]
pub struct TrackLayout {
    points: Vec<TrackPoint>,
    path: RefPath,
    kappa: Vec<f64>,
    w_left: Vec<f64>,
    w_right: Vec<f64>,
}

/// A closed track's closing segment may be at most this many times longer
/// than the longest regular segment before the file is treated as an open loop.
const MAX_CLOSING_RATIO: f64 = 5.0;

impl TrackLayout {
    /// Validate and build a track from stored samples. `s` must already be
    /// strictly increasing; it is shifted so that `s[0] = 0`.
    pub fn from_points(mut points: Vec<TrackPoint>, closed: bool) -> Result<Self, TrackError> {
        if points.len() < 2 || (closed && points.len() < 3) {
            return Err(TrackError::TooFewPoints { min: if closed { 3 } else { 2 }, got: points.len() });
        }
        for (i, p) in points.iter().enumerate() {
            let vals = [p.s, p.x, p.y, p.psi, p.kappa, p.w_left, p.w_right];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(TrackError::NonFinite { index: i });
            }
            if p.w_left <= 0.0 || p.w_right <= 0.0 {
                return Err(TrackError::NonPositiveWidth { index: i });
            }
        }
        for i in 1..points.len() {
            if points[i].s <= points[i - 1].s {
                return Err(TrackError::NonMonotoneS { index: i });
            }
        }
        let s0 = points[0].s;
        for p in &mut points {
            p.s -= s0;
            p.psi = wrap_angle(p.psi);
        }
        let total_length = closing_length(points.iter().map(|p| (p.x, p.y)), points.last().unwrap().s, closed)?;
        let reach = points.iter().map(|p| p.w_left.max(p.w_right)).fold(0.0, f64::max) + 1.0;
        let path = RefPath::new(
            points.iter().map(|p| p.s).collect(),
            points.iter().map(|p| p.x).collect(),
            points.iter().map(|p| p.y).collect(),
            points.iter().map(|p| p.psi).collect(),
            total_length,
            closed,
            reach,
        );
        Ok(TrackLayout {
            kappa: points.iter().map(|p| p.kappa).collect(),
            w_left: points.iter().map(|p| p.w_left).collect(),
            w_right: points.iter().map(|p| p.w_right).collect(),
            points,
            path,
        })
    }

    /// Build from positions and widths only; `s`, heading and curvature are
    /// derived from the point geometry.
    pub fn from_geometry(xy: &[(f64, f64)], widths: &[(f64, f64)], closed: bool) -> Result<Self, TrackError> {
        if xy.len() != widths.len() {
            return Err(TrackError::InvalidArgument("positions and widths differ in length".into()));
        }
        let derived = derive_geometry(xy, closed)?;
        let points = derived
            .into_iter()
            .zip(widths)
            .map(|((s, psi, kappa), &(wl, wr))| (s, psi, kappa, wl, wr))
            .zip(xy)
            .map(|((s, psi, kappa, w_left, w_right), &(x, y))| TrackPoint { s, x, y, psi, kappa, w_left, w_right })
            .collect();
        Self::from_points(points, closed)
    }

    pub fn points(&self) -> &[TrackPoint] {
        &self.points
    }

    pub fn total_length(&self) -> f64 {
        self.path.length()
    }

    pub fn closed(&self) -> bool {
        self.path.closed()
    }

    pub fn path(&self) -> &RefPath {
        &self.path
    }

    /// Project a Cartesian point onto the centerline.
    pub fn cartesian_to_frenet(&self, x: f64, y: f64) -> FrenetPose {
        let (s, d) = self.path.cartesian_to_frenet(x, y);
        FrenetPose { s, d }
    }

    /// Point at `pose` and the centerline heading there.
    pub fn frenet_to_cartesian(&self, pose: FrenetPose) -> (f64, f64, f64) {
        self.path.frenet_to_cartesian(pose.s, pose.d)
    }

    pub fn w_left_at(&self, s: f64) -> f64 {
        self.path.interp(&self.w_left, s)
    }

    pub fn w_right_at(&self, s: f64) -> f64 {
        self.path.interp(&self.w_right, s)
    }

    pub fn kappa_at(&self, s: f64) -> f64 {
        self.path.interp(&self.kappa, s)
    }

    pub fn min_half_width(&self) -> f64 {
        self.w_left.iter().chain(&self.w_right).cloned().fold(f64::INFINITY, f64::min)
    }
}

/// One stored raceline sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RacelinePoint {
    pub s: f64,
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub kappa: f64,
    pub v_ref: f64,
}

/// Reference trajectory with a velocity profile.
#[derive(Debug, Clone)]
pub struct Raceline {
    points: Vec<RacelinePoint>,
    path: RefPath,
    kappa: Vec<f64>,
    v_ref: Vec<f64>,
}

impl Raceline {
    pub fn from_points(mut points: Vec<RacelinePoint>, closed: bool) -> Result<Self, TrackError> {
        if points.len() < 2 || (closed && points.len() < 3) {
            return Err(TrackError::TooFewPoints { min: if closed { 3 } else { 2 }, got: points.len() });
        }
        for (i, p) in points.iter().enumerate() {
            if [p.s, p.x, p.y, p.psi, p.kappa, p.v_ref].iter().any(|v| !v.is_finite()) {
                return Err(TrackError::NonFinite { index: i });
            }
            if p.v_ref <= 0.0 {
                return Err(TrackError::NonPositiveSpeed { index: i });
            }
        }
        for i in 1..points.len() {
            if points[i].s <= points[i - 1].s {
                return Err(TrackError::NonMonotoneS { index: i });
            }
        }
        let s0 = points[0].s;
        for p in &mut points {
            p.s -= s0;
            p.psi = wrap_angle(p.psi);
        }
        let total_length = closing_length(points.iter().map(|p| (p.x, p.y)), points.last().unwrap().s, closed)?;
        let path = RefPath::new(
            points.iter().map(|p| p.s).collect(),
            points.iter().map(|p| p.x).collect(),
            points.iter().map(|p| p.y).collect(),
            points.iter().map(|p| p.psi).collect(),
            total_length,
            closed,
            2.0,
        );
        Ok(Raceline { kappa: points.iter().map(|p| p.kappa).collect(), v_ref: points.iter().map(|p| p.v_ref).collect(), points, path })
    }

    /// Use the track centerline as raceline, with a generated velocity profile.
    pub fn from_centerline(track: &TrackLayout, limits: &ProfileLimits) -> Result<Self, TrackError> {
        let pts = track.points();
        let s: Vec<f64> = pts.iter().map(|p| p.s).collect();
        let kappa: Vec<f64> = pts.iter().map(|p| p.kappa).collect();
        let v = generate_velocity_profile(&s, &kappa, track.total_length(), track.closed(), limits)?;
        let points = pts.iter().zip(v).map(|(p, v_ref)| RacelinePoint { s: p.s, x: p.x, y: p.y, psi: p.psi, kappa: p.kappa, v_ref }).collect();
        Self::from_points(points, track.closed())
    }

    pub fn points(&self) -> &[RacelinePoint] {
        &self.points
    }

    pub fn total_length(&self) -> f64 {
        self.path.length()
    }

    pub fn closed(&self) -> bool {
        self.path.closed()
    }

    pub fn path(&self) -> &RefPath {
        &self.path
    }

    pub fn v_ref_at(&self, s: f64) -> f64 {
        self.path.interp(&self.v_ref, s)
    }

    pub fn kappa_at(&self, s: f64) -> f64 {
        self.path.interp(&self.kappa, s)
    }

    pub fn heading_at(&self, s: f64) -> f64 {
        self.path.heading_at(s)
    }

    pub fn cartesian_to_frenet(&self, x: f64, y: f64) -> FrenetPose {
        let (s, d) = self.path.cartesian_to_frenet(x, y);
        FrenetPose { s, d }
    }

    pub fn frenet_to_cartesian(&self, pose: FrenetPose) -> (f64, f64, f64) {
        self.path.frenet_to_cartesian(pose.s, pose.d)
    }

    /// Same geometry with a replaced velocity profile.
    pub fn with_velocity(&self, v_ref: Vec<f64>) -> Result<Self, TrackError> {
        if v_ref.len() != self.points.len() {
            return Err(TrackError::InvalidArgument("velocity profile length mismatch".into()));
        }
        let points = self.points.iter().zip(v_ref).map(|(p, v)| RacelinePoint { v_ref: v, ..*p }).collect();
        Self::from_points(points, self.closed())
    }
}

/// Everything `s`-indexed that a controller or environment needs at one
/// raceline position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackSample {
    pub w_left: f64,
    pub w_right: f64,
    pub psi_ref: f64,
    pub kappa: f64,
    pub v_ref: f64,
}

impl TrackSample {
    /// Full corridor width at this position.
    pub fn w_track(&self) -> f64 {
        self.w_left + self.w_right
    }
}

/// Track plus raceline, with corridor half-widths re-expressed relative to
/// the raceline.
#[derive(Debug, Clone)]
pub struct Circuit {
    track: TrackLayout,
    raceline: Raceline,
    corridor_left: Vec<f64>,
    corridor_right: Vec<f64>,
}

impl Circuit {
    pub fn new(track: TrackLayout, raceline: Raceline) -> Result<Self, TrackError> {
        if track.closed() != raceline.closed() {
            return Err(TrackError::InvalidArgument("track and raceline disagree on closedness".into()));
        }
        let mut corridor_left = Vec::with_capacity(raceline.points.len());
        let mut corridor_right = Vec::with_capacity(raceline.points.len());
        for (i, p) in raceline.points.iter().enumerate() {
            let f = track.cartesian_to_frenet(p.x, p.y);
            let wl = track.w_left_at(f.s) - f.d;
            let wr = track.w_right_at(f.s) + f.d;
            if wl <= 0.0 || wr <= 0.0 {
                return Err(TrackError::OutsideCorridor { index: i, d: f.d });
            }
            corridor_left.push(wl);
            corridor_right.push(wr);
        }
        Ok(Circuit { track, raceline, corridor_left, corridor_right })
    }

    /// Circuit whose raceline is the centerline with a generated profile.
    pub fn with_generated_raceline(track: TrackLayout, limits: &ProfileLimits) -> Result<Self, TrackError> {
        let raceline = Raceline::from_centerline(&track, limits)?;
        Self::new(track, raceline)
    }

    pub fn track(&self) -> &TrackLayout {
        &self.track
    }

    pub fn raceline(&self) -> &Raceline {
        &self.raceline
    }

    /// Raceline lap length; all `s` values below are raceline arc positions.
    pub fn length(&self) -> f64 {
        self.raceline.total_length()
    }

    pub fn wrap_s(&self, s: f64) -> f64 {
        self.raceline.path.wrap_s(s)
    }

    /// Interpolated widths, heading, curvature and reference speed at `s`.
    pub fn query(&self, s: f64) -> TrackSample {
        let path = &self.raceline.path;
        TrackSample {
            w_left: path.interp(&self.corridor_left, s),
            w_right: path.interp(&self.corridor_right, s),
            psi_ref: path.heading_at(s),
            kappa: path.interp(&self.raceline.kappa, s),
            v_ref: path.interp(&self.raceline.v_ref, s),
        }
    }

    /// Project onto the raceline.
    pub fn project(&self, x: f64, y: f64) -> FrenetPose {
        self.raceline.cartesian_to_frenet(x, y)
    }

    /// `n` reference, left-bound and right-bound points starting at `s0` and
    /// spaced `spacing` apart, laid out as `[ref.., left.., right..]`.
    pub fn sample_forward_waypoints(&self, s0: f64, spacing: f64, n: usize) -> Result<Vec<[f64; 2]>, TrackError> {
        if n == 0 {
            return Err(TrackError::InvalidArgument("waypoint count must be >= 1".into()));
        }
        if !(spacing > 0.0) {
            return Err(TrackError::InvalidArgument("waypoint spacing must be > 0".into()));
        }
        let mut out = vec![[0.0; 2]; 3 * n];
        self.fill_forward_waypoints(s0, spacing, &mut out);
        Ok(out)
    }

    pub(crate) fn fill_forward_waypoints(&self, s0: f64, spacing: f64, out: &mut [[f64; 2]]) {
        let n = out.len() / 3;
        let path = &self.raceline.path;
        for k in 0..n {
            let s = s0 + k as f64 * spacing;
            let (x, y, psi) = path.frenet_to_cartesian(s, 0.0);
            let wl = path.interp(&self.corridor_left, s);
            let wr = path.interp(&self.corridor_right, s);
            let (sin, cos) = psi.sin_cos();
            out[k] = [x, y];
            out[n + k] = [x - wl * sin, y + wl * cos];
            out[2 * n + k] = [x + wr * sin, y - wr * cos];
        }
    }
}

/// Total length including the implicit closing segment; validates closure.
fn closing_length(xy: impl Iterator<Item = (f64, f64)>, s_last: f64, closed: bool) -> Result<f64, TrackError> {
    if !closed {
        return Ok(s_last);
    }
    let pts: Vec<(f64, f64)> = xy.collect();
    let first = pts[0];
    let last = *pts.last().unwrap();
    let gap = (last.0 - first.0).hypot(last.1 - first.1);
    if gap < 1e-6 {
        return Err(TrackError::DuplicateClosingPoint);
    }
    let max_seg = pts.windows(2).map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1)).fold(0.0, f64::max);
    if gap > MAX_CLOSING_RATIO * max_seg {
        return Err(TrackError::OpenLoop { gap });
    }
    Ok(s_last + gap)
}

/// Arc length, chord heading and Menger curvature from raw positions.
pub(crate) fn derive_geometry(xy: &[(f64, f64)], closed: bool) -> Result<Vec<(f64, f64, f64)>, TrackError> {
    let n = xy.len();
    if n < 2 || (closed && n < 3) {
        return Err(TrackError::TooFewPoints { min: if closed { 3 } else { 2 }, got: n });
    }
    let mut s = vec![0.0; n];
    for i in 1..n {
        s[i] = s[i - 1] + (xy[i].0 - xy[i - 1].0).hypot(xy[i].1 - xy[i - 1].1);
    }
    let neighbour = |i: usize| -> (usize, usize) {
        if closed {
            ((i + n - 1) % n, (i + 1) % n)
        } else {
            (i.saturating_sub(1), (i + 1).min(n - 1))
        }
    };
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (p, q) = neighbour(i);
        let psi = (xy[q].1 - xy[p].1).atan2(xy[q].0 - xy[p].0);
        let kappa = if p != i && q != i { menger(xy[p], xy[i], xy[q]) } else { 0.0 };
        out.push((s[i], psi, kappa));
    }
    Ok(out)
}

/// Signed curvature of the circle through three points (positive for left turns).
fn menger(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    let cross = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
    let ab = (b.0 - a.0).hypot(b.1 - a.1);
    let bc = (c.0 - b.0).hypot(c.1 - b.1);
    let ca = (a.0 - c.0).hypot(a.1 - c.1);
    let denom = ab * bc * ca;
    if denom == 0.0 {
        0.0
    } else {
        2.0 * cross / denom
    }
}
