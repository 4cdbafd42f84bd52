//! Arc-length parametrized reference polyline with Frenet conversions.
//!
//! Positions are interpolated linearly in `s` between stored points and the
//! tangent heading is interpolated on the circle. The left normal at `s` is
//! derived from that interpolated heading, which makes the Frenet map
//! `(s, d) -> P(s) + d * n(s)` continuous across vertices and exactly
//! invertible inside the corridor.

use std::collections::HashMap;

use crate::wrap_angle;

/// Reference polyline. Closed paths have an implicit segment from the last
/// point back to the first.
#[derive(Debug, Clone)]
pub struct RefPath {
    s: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
    psi: Vec<f64>,
    length: f64,
    closed: bool,
    grid: SegmentGrid,
}

#[derive(Debug, Clone)]
struct SegmentGrid {
    cell: f64,
    reach: f64,
    cells: HashMap<(i64, i64), Vec<u32>>,
}

/// Segment-local root of the foot-point equation.
#[derive(Debug, Clone, Copy)]
struct Foot {
    s: f64,
    d: f64,
}

impl RefPath {
    /// Build a path. `length` is the total arc length (for closed paths it
    /// includes the closing segment). `reach` bounds the lateral distance for
    /// which the spatial grid answers queries without a full scan.
    pub(crate) fn new(s: Vec<f64>, x: Vec<f64>, y: Vec<f64>, psi: Vec<f64>, length: f64, closed: bool, reach: f64) -> Self {
        debug_assert!(s.len() >= 2 && s.len() == x.len() && x.len() == y.len() && y.len() == psi.len());
        let mut path = RefPath { s, x, y, psi, length, closed, grid: SegmentGrid { cell: 1.0, reach, cells: HashMap::new() } };
        path.grid = SegmentGrid::build(&path, reach);
        path
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn closed(&self) -> bool {
        self.closed
    }

    pub fn s_values(&self) -> &[f64] {
        &self.s
    }

    fn num_segments(&self) -> usize {
        self.s.len() - 1 + usize::from(self.closed)
    }

    /// Endpoints and arc bounds of segment `i`.
    fn segment(&self, i: usize) -> (usize, usize, f64, f64) {
        let n = self.s.len();
        if i + 1 < n {
            (i, i + 1, self.s[i], self.s[i + 1])
        } else {
            (n - 1, 0, self.s[n - 1], self.length)
        }
    }

    /// Map any `s` into `[0, length)` for closed paths; open paths pass through.
    pub fn wrap_s(&self, s: f64) -> f64 {
        if !self.closed {
            return s;
        }
        let mut r = s.rem_euclid(self.length);
        if r >= self.length {
            r -= self.length;
        }
        r
    }

    /// Segment index and local parameter for an arc position. Open paths
    /// extrapolate along the first/last segment (u outside [0, 1]).
    pub(crate) fn locate(&self, s: f64) -> (usize, f64) {
        let s = self.wrap_s(s);
        let nseg = self.num_segments();
        // index of the last stored point with s_i <= s
        let idx = self.s.partition_point(|&v| v <= s).saturating_sub(1);
        let seg = idx.min(nseg - 1);
        let (_, _, sa, sb) = self.segment(seg);
        (seg, (s - sa) / (sb - sa))
    }

    /// Linear interpolation of a per-point scalar channel at `s`.
    pub(crate) fn interp(&self, values: &[f64], s: f64) -> f64 {
        let (seg, u) = self.locate(s);
        let (a, b, _, _) = self.segment(seg);
        values[a] + u * (values[b] - values[a])
    }

    fn heading_on(&self, seg: usize, u: f64) -> f64 {
        let (a, b, _, _) = self.segment(seg);
        wrap_angle(self.psi[a] + u * wrap_angle(self.psi[b] - self.psi[a]))
    }

    fn position_on(&self, seg: usize, u: f64) -> (f64, f64) {
        let (a, b, _, _) = self.segment(seg);
        (self.x[a] + u * (self.x[b] - self.x[a]), self.y[a] + u * (self.y[b] - self.y[a]))
    }

    /// Interpolated tangent heading at `s`, wrapped to `(-pi, pi]`.
    pub fn heading_at(&self, s: f64) -> f64 {
        let (seg, u) = self.locate(s);
        self.heading_on(seg, u)
    }

    /// Point at arc position `s`, offset `d` along the left normal, plus the
    /// reference heading there.
    pub fn frenet_to_cartesian(&self, s: f64, d: f64) -> (f64, f64, f64) {
        let (seg, u) = self.locate(s);
        let (px, py) = self.position_on(seg, u);
        let psi = self.heading_on(seg, u);
        let (sin, cos) = psi.sin_cos();
        (px - d * sin, py + d * cos, psi)
    }

    /// Project a Cartesian point onto the path, returning `(s, d)` with `d`
    /// positive to the left.
    pub fn cartesian_to_frenet(&self, qx: f64, qy: f64) -> (f64, f64) {
        let mut best: Option<Foot> = None;
        if let Some(cands) = self.grid.candidates(qx, qy) {
            for &seg in cands {
                if let Some(f) = self.foot_on_segment(seg as usize, qx, qy) {
                    best = pick(best, f);
                }
            }
        }
        if let Some(f) = best {
            if f.d.abs() <= self.grid.reach {
                return (self.wrap_s(f.s), f.d);
            }
        }
        // Far from the path: exhaustive search.
        let mut best: Option<Foot> = None;
        for seg in 0..self.num_segments() {
            if let Some(f) = self.foot_on_segment(seg, qx, qy) {
                best = pick(best, f);
            }
        }
        match best {
            Some(f) => (self.wrap_s(f.s), f.d),
            None => self.nearest_point_fallback(qx, qy),
        }
    }

    /// Solve `(q - P(u)) . t(u) = 0` on one segment. Returns `None` when the
    /// foot point lies outside the segment.
    fn foot_on_segment(&self, seg: usize, qx: f64, qy: f64) -> Option<Foot> {
        let (a, b, sa, sb) = self.segment(seg);
        let ex = self.x[b] - self.x[a];
        let ey = self.y[b] - self.y[a];
        let wx = qx - self.x[a];
        let wy = qy - self.y[a];
        let psi_a = self.psi[a];
        let dpsi = wrap_angle(self.psi[b] - psi_a);
        let g = |u: f64| {
            let (sin, cos) = (psi_a + u * dpsi).sin_cos();
            (wx - u * ex) * cos + (wy - u * ey) * sin
        };
        let dg = |u: f64| {
            let (sin, cos) = (psi_a + u * dpsi).sin_cos();
            -(ex * cos + ey * sin) + dpsi * (-(wx - u * ex) * sin + (wy - u * ey) * cos)
        };

        let nseg = self.num_segments();
        let open_first = !self.closed && seg == 0;
        let open_last = !self.closed && seg == nseg - 1;

        let g0 = g(0.0);
        let g1 = g(1.0);
        let u = if g0 >= 0.0 && g1 <= 0.0 {
            solve_bracketed(&g, &dg, 0.0, 1.0, g0)
        } else if open_first && g0 < 0.0 {
            // before the start of an open path: heading is fixed at psi_a there
            let (sin, cos) = psi_a.sin_cos();
            (wx * cos + wy * sin) / (ex * cos + ey * sin)
        } else if open_last && g1 > 0.0 {
            let psi_b = self.psi[b];
            let (sin, cos) = psi_b.sin_cos();
            1.0 + ((wx - ex) * cos + (wy - ey) * sin) / (ex * cos + ey * sin)
        } else {
            return None;
        };

        let (px, py) = self.position_on(seg, u);
        let psi = if u < 0.0 {
            psi_a
        } else if u > 1.0 {
            self.psi[b]
        } else {
            psi_a + u * dpsi
        };
        let (sin, cos) = psi.sin_cos();
        let d = -(qx - px) * sin + (qy - py) * cos;
        Some(Foot { s: sa + u * (sb - sa), d })
    }

    fn nearest_point_fallback(&self, qx: f64, qy: f64) -> (f64, f64) {
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for seg in 0..self.num_segments() {
            let (a, b, sa, sb) = self.segment(seg);
            let ex = self.x[b] - self.x[a];
            let ey = self.y[b] - self.y[a];
            let l2 = ex * ex + ey * ey;
            let u = (((qx - self.x[a]) * ex + (qy - self.y[a]) * ey) / l2).clamp(0.0, 1.0);
            let px = self.x[a] + u * ex;
            let py = self.y[a] + u * ey;
            let dist = ((qx - px).powi(2) + (qy - py).powi(2)).sqrt();
            if dist < best.0 {
                let cross = ex * (qy - py) - ey * (qx - px);
                best = (dist, sa + u * (sb - sa), dist.copysign(cross));
            }
        }
        (self.wrap_s(best.1), best.2)
    }
}

fn pick(best: Option<Foot>, f: Foot) -> Option<Foot> {
    match best {
        None => Some(f),
        Some(b) => {
            let (fa, ba) = (f.d.abs(), b.d.abs());
            if fa < ba || (fa == ba && f.s < b.s) {
                Some(f)
            } else {
                Some(b)
            }
        }
    }
}

/// Safeguarded Newton on a decreasing bracket `g(lo) >= 0 >= g(hi)`.
fn solve_bracketed<G, D>(g: &G, dg: &D, mut lo: f64, mut hi: f64, g_lo: f64) -> f64
where
    G: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    if g_lo == 0.0 {
        return lo;
    }
    let mut u = 0.5 * (lo + hi);
    for _ in 0..100 {
        let gu = g(u);
        if gu == 0.0 {
            return u;
        }
        if gu > 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        let d = dg(u);
        let mut next = if d != 0.0 { u - gu / d } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - u).abs() <= 1e-16 || hi - lo <= 1e-16 {
            return next;
        }
        u = next;
    }
    u
}

impl SegmentGrid {
    fn build(path: &RefPath, reach: f64) -> Self {
        let nseg = path.num_segments();
        let mut max_seg: f64 = 0.0;
        for i in 0..nseg {
            let (a, b, _, _) = path.segment(i);
            max_seg = max_seg.max((path.x[b] - path.x[a]).hypot(path.y[b] - path.y[a]));
        }
        let cell = (reach + max_seg).max(1e-3);
        let mut cells: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        for i in 0..nseg {
            let (a, b, _, _) = path.segment(i);
            let x0 = path.x[a].min(path.x[b]) - reach;
            let x1 = path.x[a].max(path.x[b]) + reach;
            let y0 = path.y[a].min(path.y[b]) - reach;
            let y1 = path.y[a].max(path.y[b]) + reach;
            let (cx0, cy0) = ((x0 / cell).floor() as i64, (y0 / cell).floor() as i64);
            let (cx1, cy1) = ((x1 / cell).floor() as i64, (y1 / cell).floor() as i64);
            for cx in cx0..=cx1 {
                for cy in cy0..=cy1 {
                    cells.entry((cx, cy)).or_default().push(i as u32);
                }
            }
        }
        SegmentGrid { cell, reach, cells }
    }

    fn candidates(&self, x: f64, y: f64) -> Option<&Vec<u32>> {
        if !x.is_finite() || !y.is_finite() {
            return None;
        }
        let key = ((x / self.cell).floor() as i64, (y / self.cell).floor() as i64);
        self.cells.get(&key)
    }
}
