//! CSV ingestion and export for tracks and racelines.
//!
//! Track: `s_m,x_m,y_m,psi_rad,kappa_radpm,w_tr_left_m,w_tr_right_m`
//! Raceline: `s_m,x_m,y_m,psi_rad,kappa_radpm,vx_mps`
//!
//! `#` lines are comments. `s_m`, `psi_rad` and `kappa_radpm` may be omitted,
//! in which case they are derived from the point geometry. Closed tracks must
//! not repeat the first point at the end.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{derive_geometry, Raceline, RacelinePoint, TrackError, TrackLayout, TrackPoint};

const TRACK_COLUMNS: [&str; 7] = ["s_m", "x_m", "y_m", "psi_rad", "kappa_radpm", "w_tr_left_m", "w_tr_right_m"];
const RACELINE_COLUMNS: [&str; 6] = ["s_m", "x_m", "y_m", "psi_rad", "kappa_radpm", "vx_mps"];
const OPTIONAL: [&str; 3] = ["s_m", "psi_rad", "kappa_radpm"];

/// Load a closed track from a CSV file.
pub fn load_track(path: impl AsRef<Path>) -> Result<TrackLayout, TrackError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| TrackError::Io { path: path.to_path_buf(), source })?;
    read_track(file, true)
}

/// Load a closed raceline from a CSV file.
pub fn load_raceline(path: impl AsRef<Path>) -> Result<Raceline, TrackError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| TrackError::Io { path: path.to_path_buf(), source })?;
    read_raceline(file, true)
}

pub fn read_track<R: Read>(reader: R, closed: bool) -> Result<TrackLayout, TrackError> {
    let table = read_table(reader, &TRACK_COLUMNS)?;
    let xy: Vec<(f64, f64)> = table.rows.iter().map(|r| (table.get(r, "x_m").unwrap(), table.get(r, "y_m").unwrap())).collect();
    let derived = derive_if_needed(&table, &xy, closed)?;
    let points = table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let (s, psi, kappa) = derived[i];
            TrackPoint {
                s,
                x: xy[i].0,
                y: xy[i].1,
                psi,
                kappa,
                w_left: table.get(r, "w_tr_left_m").unwrap(),
                w_right: table.get(r, "w_tr_right_m").unwrap(),
            }
        })
        .collect();
    TrackLayout::from_points(points, closed)
}

pub fn read_raceline<R: Read>(reader: R, closed: bool) -> Result<Raceline, TrackError> {
    let table = read_table(reader, &RACELINE_COLUMNS)?;
    let xy: Vec<(f64, f64)> = table.rows.iter().map(|r| (table.get(r, "x_m").unwrap(), table.get(r, "y_m").unwrap())).collect();
    let derived = derive_if_needed(&table, &xy, closed)?;
    let points = table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let (s, psi, kappa) = derived[i];
            RacelinePoint { s, x: xy[i].0, y: xy[i].1, psi, kappa, v_ref: table.get(r, "vx_mps").unwrap() }
        })
        .collect();
    Raceline::from_points(points, closed)
}

pub fn write_track<W: Write>(mut w: W, track: &TrackLayout) -> std::io::Result<()> {
    writeln!(w, "{}", TRACK_COLUMNS.join(","))?;
    for p in track.points() {
        writeln!(w, "{},{},{},{},{},{},{}", p.s, p.x, p.y, p.psi, p.kappa, p.w_left, p.w_right)?;
    }
    Ok(())
}

pub fn write_raceline<W: Write>(mut w: W, raceline: &Raceline) -> std::io::Result<()> {
    writeln!(w, "{}", RACELINE_COLUMNS.join(","))?;
    for p in raceline.points() {
        writeln!(w, "{},{},{},{},{},{}", p.s, p.x, p.y, p.psi, p.kappa, p.v_ref)?;
    }
    Ok(())
}

struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    fn get(&self, row: &[f64], name: &str) -> Option<f64> {
        self.index(name).map(|i| row[i])
    }
}

fn read_table<R: Read>(reader: R, schema: &[&str]) -> Result<Table, TrackError> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| TrackError::MalformedHeader(e.to_string()))?.clone();
    let columns: Vec<String> = header.iter().map(str::to_owned).collect();
    for c in &columns {
        if !schema.contains(&c.as_str()) {
            return Err(TrackError::MalformedHeader(format!("unknown column '{c}'")));
        }
    }
    for (i, c) in columns.iter().enumerate() {
        if columns[..i].contains(c) {
            return Err(TrackError::MalformedHeader(format!("duplicate column '{c}'")));
        }
    }
    for required in schema.iter().filter(|c| !OPTIONAL.contains(c)) {
        if !columns.iter().any(|c| c == required) {
            return Err(TrackError::MalformedHeader(format!("missing column '{required}'")));
        }
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| TrackError::Parse { record: i, msg: e.to_string() })?;
        if rec.len() != columns.len() {
            return Err(TrackError::Parse { record: i, msg: format!("expected {} fields, got {}", columns.len(), rec.len()) });
        }
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| TrackError::Parse { record: i, msg: format!("'{f}': {e}") }))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(Table { columns, rows })
}

/// Use the file's `s`, heading and curvature where present, geometry otherwise.
fn derive_if_needed(table: &Table, xy: &[(f64, f64)], closed: bool) -> Result<Vec<(f64, f64, f64)>, TrackError> {
    let has = |c| table.index(c).is_some();
    let geometric = if has("s_m") && has("psi_rad") && has("kappa_radpm") { None } else { Some(derive_geometry(xy, closed)?) };
    Ok(table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let g = geometric.as_ref().map(|g| g[i]);
            (
                table.get(r, "s_m").unwrap_or_else(|| g.unwrap().0),
                table.get(r, "psi_rad").unwrap_or_else(|| g.unwrap().1),
                table.get(r, "kappa_radpm").unwrap_or_else(|| g.unwrap().2),
            )
        })
        .collect())
}
