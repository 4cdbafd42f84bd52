use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{RewardBreakdown, StepInfo};

pub const TELEMETRY_HEADER: &str = "step,t,s,d,delta_psi,x,y,phi,vx,vy,r,delta_cmd,v_cmd,r_adv,r_speed,r_dev,r_heading,r_coll,r_tot";

/// One control step of a rollout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRow {
    pub step: usize,
    pub t: f64,
    pub s: f64,
    pub d: f64,
    pub delta_psi: f64,
    pub x: f64,
    pub y: f64,
    pub phi: f64,
    pub vx: f64,
    pub vy: f64,
    pub r: f64,
    pub delta_cmd: f64,
    pub v_cmd: f64,
    pub r_adv: f64,
    pub r_speed: f64,
    pub r_dev: f64,
    pub r_heading: f64,
    pub r_coll: f64,
    pub r_tot: f64,
}

impl TelemetryRow {
    pub fn new(step: usize, info: &StepInfo, rw: &RewardBreakdown) -> Self {
        let st = &info.state;
        TelemetryRow {
            step,
            t: info.t,
            s: info.s,
            d: info.d,
            delta_psi: info.delta_psi,
            x: st.x,
            y: st.y,
            phi: st.phi,
            vx: st.vx,
            vy: st.vy,
            r: st.r,
            delta_cmd: info.cmd.delta,
            v_cmd: info.cmd.v,
            r_adv: rw.r_adv,
            r_speed: rw.r_speed,
            r_dev: rw.r_dev,
            r_heading: rw.r_heading,
            r_coll: rw.r_coll,
            r_tot: rw.r_tot,
        }
    }
}

/// Write rows as CSV with [`TELEMETRY_HEADER`]; floats use shortest round-trip form.
pub fn write_telemetry<W: Write>(w: W, rows: &[TelemetryRow]) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    if rows.is_empty() {
        wtr.write_record(TELEMETRY_HEADER.split(','))?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_matches_and_round_trips() {
        let row = TelemetryRow {
            step: 3,
            t: 0.075,
            s: 1.0 / 3.0,
            d: -0.1,
            delta_psi: 0.01,
            x: 1.0,
            y: 2.0,
            phi: 0.3,
            vx: 2.0,
            vy: 0.0,
            r: 0.1,
            delta_cmd: 0.05,
            v_cmd: 2.5,
            r_adv: 0.25,
            r_speed: 0.25,
            r_dev: 0.0,
            r_heading: -0.001,
            r_coll: 0.0,
            r_tot: 0.4995,
        };
        let mut buf = Vec::new();
        write_telemetry(&mut buf, &[row]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), TELEMETRY_HEADER);
        let mut rdr = csv::Reader::from_reader(buf.as_slice());
        let back: TelemetryRow = rdr.deserialize().next().unwrap().unwrap();
        assert_eq!(back, row);
        let mut empty = Vec::new();
        write_telemetry(&mut empty, &[]).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap().trim_end(), TELEMETRY_HEADER);
    }
}
