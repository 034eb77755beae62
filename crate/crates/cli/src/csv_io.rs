//! Trajectory CSV export and read-back.
//!
//! One row per (sample, robot, axis), robot-major within a sample. Floats
//! are written with 9 significant digits, which preserves every
//! report-derivable quantity to 1e-9 on read-back. The format pairs each
//! position axis with the control axis of the same index, so export requires
//! the state and input dimensions to match (true for the integrator models
//! this tool targets).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rendezvous_core::TrajectoryLog64;

use crate::error::CliError;

pub const CSV_HEADER: &str = "t,robot,axis,x,u_raw,u_applied,saturated,V_quad,V_sat,J_cum,Ji_cum";

/// 9 significant digits, scientific.
fn fmt(v: f64) -> String {
    format!("{v:.8e}")
}

pub fn export_csv(log: &TrajectoryLog64, path: &Path) -> Result<(), CliError> {
    if log.m != log.r_dim {
        return Err(CliError::validation(format!(
            "trajectory CSV pairs position and control axes row by row; \
             state dimension {} does not match input dimension {}",
            log.m, log.r_dim
        )));
    }
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_csv(log, &mut w).map_err(|e| CliError::io(path, e))
}

fn write_csv(log: &TrajectoryLog64, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for s in 0..log.n_samples() {
        for robot in 0..log.n {
            for axis in 0..log.m {
                let idx = robot * log.m + axis;
                writeln!(
                    w,
                    "{},{robot},{axis},{},{},{},{},{},{},{},{}",
                    fmt(log.times[s]),
                    fmt(log.positions[s][idx]),
                    fmt(log.u_raw[s][idx]),
                    fmt(log.u_applied[s][idx]),
                    u8::from(log.saturated[s][idx]),
                    fmt(log.v_quadratic[s]),
                    fmt(log.v_saturated[s]),
                    fmt(log.j_cumulative[s]),
                    fmt(log.j_per_robot[s][robot]),
                )?;
            }
        }
    }
    w.flush()
}

/// Samples reconstructed from an exported CSV; enough to re-derive a full
/// report.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTrajectory {
    pub times: Vec<f64>,
    /// `[sample][robot * m + axis]`, as in the live log.
    pub positions: Vec<Vec<f64>>,
    pub u_raw: Vec<Vec<f64>>,
    pub u_applied: Vec<Vec<f64>>,
}

pub fn read_csv(path: &Path, n: usize, m: usize) -> Result<CsvTrajectory, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();

    let header = match lines.next() {
        Some((_, line)) => line.map_err(|e| CliError::io(path, e))?,
        None => return Err(CliError::validation(format!("{}: empty file", path.display()))),
    };
    if header.trim_end() != CSV_HEADER {
        return Err(CliError::validation(format!(
            "{}: unexpected header {header:?}",
            path.display()
        )));
    }

    let block = n * m;
    let mut out = CsvTrajectory {
        times: Vec::new(),
        positions: Vec::new(),
        u_raw: Vec::new(),
        u_applied: Vec::new(),
    };
    let mut row_index = 0usize;
    for (lineno, line) in lines {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 11 {
            return Err(CliError::validation(format!(
                "{}: line {}: expected 11 fields, got {}",
                path.display(),
                lineno + 1,
                fields.len()
            )));
        }
        let num = |idx: usize, name: &str| -> Result<f64, CliError> {
            fields[idx].parse::<f64>().map_err(|_| {
                CliError::validation(format!(
                    "{}: line {}: field {name} is not a number: {:?}",
                    path.display(),
                    lineno + 1,
                    fields[idx]
                ))
            })
        };
        let int = |idx: usize, name: &str| -> Result<usize, CliError> {
            fields[idx].parse::<usize>().map_err(|_| {
                CliError::validation(format!(
                    "{}: line {}: field {name} is not an index: {:?}",
                    path.display(),
                    lineno + 1,
                    fields[idx]
                ))
            })
        };
        let t = num(0, "t")?;
        let robot = int(1, "robot")?;
        let axis = int(2, "axis")?;
        let slot = row_index % block;
        let (want_robot, want_axis) = (slot / m, slot % m);
        if robot != want_robot || axis != want_axis {
            return Err(CliError::validation(format!(
                "{}: line {}: expected robot {want_robot} axis {want_axis} \
                 in robot-major order, got robot {robot} axis {axis}",
                path.display(),
                lineno + 1,
            )));
        }
        if slot == 0 {
            out.times.push(t);
            out.positions.push(vec![0.0; block]);
            out.u_raw.push(vec![0.0; block]);
            out.u_applied.push(vec![0.0; block]);
        } else if t != *out.times.last().expect("sample started") {
            return Err(CliError::validation(format!(
                "{}: line {}: time {t} differs within one sample",
                path.display(),
                lineno + 1,
            )));
        }
        let sample = out.positions.last_mut().expect("sample started");
        sample[slot] = num(3, "x")?;
        out.u_raw.last_mut().expect("sample started")[slot] = num(4, "u_raw")?;
        out.u_applied.last_mut().expect("sample started")[slot] = num(5, "u_applied")?;
        row_index += 1;
    }
    if row_index == 0 {
        return Err(CliError::validation(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    if row_index % block != 0 {
        return Err(CliError::validation(format!(
            "{}: truncated: {row_index} rows is not a whole number of {block}-row samples",
            path.display()
        )));
    }
    Ok(out)
}
