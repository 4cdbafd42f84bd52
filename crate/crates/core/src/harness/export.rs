use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EvalRun, HarnessError, LapStats};
use crate::env::write_telemetry;
use crate::track::{Circuit, FrenetPose};

pub const SUMMARY_HEADER: &str = "controller,t_mean,t_std,t_min,t_max,d_mean,d_std,cpu_mean_ms,cpu_std_ms,laps,violations";

/// One results-table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub controller: String,
    pub t_mean: f64,
    pub t_std: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub d_mean: f64,
    pub d_std: f64,
    pub cpu_mean_ms: f64,
    pub cpu_std_ms: f64,
    pub laps: usize,
    pub violations: usize,
}

impl SummaryRow {
    pub fn new(controller: &str, s: &LapStats) -> Self {
        SummaryRow {
            controller: controller.into(),
            t_mean: s.t_mean,
            t_std: s.t_std,
            t_min: s.t_min,
            t_max: s.t_max,
            d_mean: s.d_mean,
            d_std: s.d_std,
            cpu_mean_ms: s.cpu_mean * 1e3,
            cpu_std_ms: s.cpu_std * 1e3,
            laps: s.n_laps,
            violations: s.n_violations,
        }
    }
}

pub fn write_summary<W: Write>(w: W, rows: &[SummaryRow]) -> Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    if rows.is_empty() {
        wr.write_record(SUMMARY_HEADER.split(','))?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>, HarnessError> {
    let mut rd = csv::Reader::from_path(path)?;
    Ok(rd.deserialize().collect::<Result<Vec<SummaryRow>, _>>()?)
}

#[derive(Debug, Serialize, Deserialize)]
struct LapLine {
    lap: usize,
    lap_time: f64,
    violation: bool,
    mean_abs_d: f64,
    steps: usize,
}

/// Lap times from a `laps.csv` written by [`export_artifacts`].
pub fn read_lap_times(path: &Path) -> Result<Vec<f64>, HarnessError> {
    let mut rd = csv::Reader::from_path(path)?;
    rd.deserialize::<LapLine>().map(|l| Ok(l?.lap_time)).collect()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

fn create(path: &Path) -> Result<fs::File, HarnessError> {
    fs::File::create(path).map_err(io_err(path))
}

/// Write per-lap telemetry (`lap_NN.csv`), `laps.csv`, `summary.csv`,
/// `trajectory.svg` and `velocity.svg` into `out`.
pub fn export_artifacts(run: &EvalRun, stats: Option<&LapStats>, circuit: &Circuit, out: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut files = Vec::new();
    for lap in &run.laps {
        let p = out.join(format!("lap_{:02}.csv", lap.lap));
        write_telemetry(create(&p)?, &lap.telemetry)?;
        files.push(p);
    }
    let p = out.join("laps.csv");
    let mut wr = csv::Writer::from_writer(create(&p)?);
    for l in &run.laps {
        wr.serialize(LapLine { lap: l.lap, lap_time: l.lap_time, violation: l.violation, mean_abs_d: l.mean_abs_d, steps: l.telemetry.len() })?;
    }
    if run.laps.is_empty() {
        wr.write_record(["lap", "lap_time", "violation", "mean_abs_d", "steps"])?;
    }
    wr.flush().map_err(io_err(&p))?;
    files.push(p);
    if let Some(s) = stats {
        let p = out.join("summary.csv");
        write_summary(create(&p)?, &[SummaryRow::new(&run.controller, s)])?;
        files.push(p);
    }
    for (name, svg) in [("trajectory.svg", trajectory_svg(run, circuit)), ("velocity.svg", velocity_svg(run, circuit))] {
        let p = out.join(name);
        fs::write(&p, svg).map_err(io_err(&p))?;
        files.push(p);
    }
    Ok(files)
}

struct Frame {
    x0: f64,
    y1: f64,
    scale_x: f64,
    scale_y: f64,
}

const SIZE: f64 = 800.0;
const MARGIN: f64 = 20.0;

impl Frame {
    fn fit(xs: impl Iterator<Item = (f64, f64)>, equal: bool) -> Self {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in xs {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        let span = |a: f64, b: f64| if b - a > 1e-9 { b - a } else { 1.0 };
        let (mut sx, mut sy) = ((SIZE - 2.0 * MARGIN) / span(x0, x1), (SIZE - 2.0 * MARGIN) / span(y0, y1));
        if equal {
            sx = sx.min(sy);
            sy = sx;
        }
        Frame { x0, y1, scale_x: sx, scale_y: sy }
    }

    fn pt(&self, x: f64, y: f64) -> (f64, f64) {
        (MARGIN + (x - self.x0) * self.scale_x, MARGIN + (self.y1 - y) * self.scale_y)
    }
}

fn path_d(frame: &Frame, pts: impl Iterator<Item = (f64, f64)>, close: bool) -> String {
    let mut d = String::new();
    for (i, (x, y)) in pts.enumerate() {
        let (px, py) = frame.pt(x, y);
        let _ = write!(d, "{}{:.3} {:.3}", if i == 0 { "M" } else { " L" }, px, py);
    }
    if close && !d.is_empty() {
        d.push_str(" Z");
    }
    d
}

fn svg_open(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n<title>{title}</title>\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

fn boundary(circuit: &Circuit, left: bool) -> Vec<(f64, f64)> {
    let track = circuit.track();
    track
        .points()
        .iter()
        .map(|p| {
            let d = if left { p.w_left } else { -p.w_right };
            let (x, y, _) = track.frenet_to_cartesian(FrenetPose { s: p.s, d });
            (x, y)
        })
        .collect()
}

/// Track bounds, dashed raceline and the driven path of all recorded laps.
/// The driven path has one vertex per telemetry row.
pub fn trajectory_svg(run: &EvalRun, circuit: &Circuit) -> String {
    let closed = circuit.track().closed();
    let left = boundary(circuit, true);
    let right = boundary(circuit, false);
    let race: Vec<(f64, f64)> = circuit.raceline().points().iter().map(|p| (p.x, p.y)).collect();
    let driven: Vec<(f64, f64)> = run.laps.iter().flat_map(|l| l.telemetry.iter().map(|r| (r.x, r.y))).collect();
    let frame = Frame::fit(left.iter().chain(&right).chain(&driven).copied(), true);
    let mut s = svg_open(&format!("{} trajectory", run.controller));
    for (id, pts) in [("left", &left), ("right", &right)] {
        let _ = writeln!(
            s,
            "<path id=\"{id}\" d=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>",
            path_d(&frame, pts.iter().copied(), closed)
        );
    }
    let _ = writeln!(
        s,
        "<path id=\"raceline\" d=\"{}\" fill=\"none\" stroke=\"gray\" stroke-dasharray=\"6 4\"/>",
        path_d(&frame, race.iter().copied(), closed)
    );
    let _ = writeln!(
        s,
        "<path id=\"driven\" d=\"{}\" fill=\"none\" stroke=\"crimson\" stroke-width=\"1\"/>",
        path_d(&frame, driven.iter().copied(), false)
    );
    s.push_str("</svg>\n");
    s
}

/// Speed over arc length: reference profile dashed, one curve per lap.
pub fn velocity_svg(run: &EvalRun, circuit: &Circuit) -> String {
    let rl = circuit.raceline();
    let reference: Vec<(f64, f64)> = rl.points().iter().map(|p| (p.s, p.v_ref)).collect();
    let laps: Vec<Vec<(f64, f64)>> = run.laps.iter().map(|l| l.telemetry.iter().map(|r| (r.s, r.vx)).collect()).collect();
    let all = reference.iter().chain(laps.iter().flatten()).copied().chain([(0.0, 0.0)]);
    let frame = Frame::fit(all, false);
    let mut s = svg_open(&format!("{} speed over s", run.controller));
    let _ = writeln!(
        s,
        "<path id=\"v_ref\" d=\"{}\" fill=\"none\" stroke=\"gray\" stroke-dasharray=\"6 4\"/>",
        path_d(&frame, reference.iter().copied(), false)
    );
    for (i, pts) in laps.iter().enumerate() {
        // split where s wraps so the curve does not jump back across the plot
        let mut segs: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
        for w in pts {
            if let Some(&(ps, _)) = segs.last().unwrap().last() {
                if w.0 < ps - 0.5 * rl.total_length() {
                    segs.push(Vec::new());
                }
            }
            segs.last_mut().unwrap().push(*w);
        }
        let d: Vec<String> = segs.into_iter().filter(|g| !g.is_empty()).map(|g| path_d(&frame, g.into_iter(), false)).collect();
        let _ = writeln!(s, "<path id=\"lap{:02}\" d=\"{}\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"1\"/>", i + 1, d.join(" "));
    }
    s.push_str("</svg>\n");
    s
}
