//! Per-step simulation log as CSV.
//!
//! One header row, then one row per control step. Column order is fixed:
//!
//! | columns | meaning |
//! |---|---|
//! | `t` | time (s) |
//! | `x y z` | position (m), inertial |
//! | `x_d y_d z_d` | reference position (m) |
//! | `vx vy vz` | velocity (m/s), inertial |
//! | `qw qx qy qz` | attitude quaternion, body to inertial |
//! | `roll pitch yaw` | ZYX Euler angles (rad) |
//! | `gimbal_lock` | 1 when pitch is within 1e-6 of +-pi/2 |
//! | `wx wy wz` | body angular velocity (rad/s) |
//! | `f1 f2 f3 f4` | rotor thrusts (N) |
//! | `beta1 beta2` | top rotor tilt angles (rad) |
//! | `fz_cmd` | commanded body-z force (N) |
//! | `tau_x_cmd tau_y_cmd tau_z_cmd` | commanded body torque (N m) |
//! | `clamp_f1 .. clamp_f4` | 1 when that thrust was clamped at zero |
//! | `tilt_limit_1 tilt_limit_2` | 1 when that servo exceeded its limit |
//! | `mode` | `none`, `bottom3`, `bottom4` or `bottom-both` |
//! | `substeps` | physics steps integrated after the row |
//!
//! Reals are written as `{:.16e}`, which round-trips every `f64` exactly.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use biquadcopter_core::actuation::{ActuatorCommand, SaturationReport};
use biquadcopter_core::rigid_body::Quat;
use biquadcopter_core::sim::{EulerZyx, SimLogRecord};
use nalgebra::Vector3;
use thiserror::Error;

use crate::{mode_token, parse_mode_token};

pub const HEADER: [&str; 39] = [
    "t", "x", "y", "z", "x_d", "y_d", "z_d", "vx", "vy", "vz", "qw", "qx", "qy", "qz", "roll", "pitch",
    "yaw", "gimbal_lock", "wx", "wy", "wz", "f1", "f2", "f3", "f4", "beta1", "beta2", "fz_cmd", "tau_x_cmd",
    "tau_y_cmd", "tau_z_cmd", "clamp_f1", "clamp_f2", "clamp_f3", "clamp_f4", "tilt_limit_1",
    "tilt_limit_2", "mode", "substeps",
];

#[derive(Debug, Error)]
pub enum CsvLogError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("line {line}: {message}")]
    Format { line: u64, message: String },
}

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

fn row(r: &SimLogRecord) -> Vec<String> {
    let mut out = Vec::with_capacity(HEADER.len());
    out.push(real(r.t));
    out.extend(r.position.iter().map(|&x| real(x)));
    out.extend(r.position_desired.iter().map(|&x| real(x)));
    out.extend(r.velocity.iter().map(|&x| real(x)));
    out.extend([r.attitude.w, r.attitude.i, r.attitude.j, r.attitude.k].map(real));
    out.extend([r.euler.roll, r.euler.pitch, r.euler.yaw].map(real));
    out.push(flag(r.euler.near_gimbal_lock));
    out.extend(r.angular_velocity.iter().map(|&x| real(x)));
    out.extend(r.command.thrust.map(real));
    out.extend(r.command.tilt.map(real));
    out.push(real(r.fz_cmd));
    out.extend(r.torque_cmd.iter().map(|&x| real(x)));
    out.extend(r.saturation.clamped.map(flag));
    out.extend(r.saturation.tilt_exceeded.map(flag));
    out.push(mode_token(r.mode).to_string());
    out.push(r.substeps.to_string());
    out
}

pub fn write_records<W: Write>(records: &[SimLogRecord], sink: W) -> Result<(), CsvLogError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(HEADER)?;
    for r in records {
        w.write_record(row(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(records: &[SimLogRecord], path: &Path) -> Result<(), CsvLogError> {
    write_records(records, io::BufWriter::new(File::create(path)?))
}

fn parse_flag(s: &str, line: u64) -> Result<bool, CsvLogError> {
    match s {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(CsvLogError::Format { line, message: format!("expected 0 or 1, got {s:?}") }),
    }
}

/// Parses a log written by [`write_records`].
pub fn read_records<R: io::Read>(source: R) -> Result<Vec<SimLogRecord>, CsvLogError> {
    let mut reader = csv::Reader::from_reader(source);
    let header = reader.headers()?.clone();
    if header.iter().ne(HEADER) {
        return Err(CsvLogError::Format { line: 1, message: "unexpected header".to_string() });
    }
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |i: usize| -> Result<f64, CsvLogError> {
            rec[i].parse().map_err(|_| CsvLogError::Format {
                line,
                message: format!("column {}: not a number: {:?}", HEADER[i], &rec[i]),
            })
        };
        let v3 = |i: usize| -> Result<Vector3<f64>, CsvLogError> { Ok(Vector3::new(num(i)?, num(i + 1)?, num(i + 2)?)) };
        let mode = parse_mode_token(&rec[37])
            .ok_or_else(|| CsvLogError::Format { line, message: format!("unknown mode {:?}", &rec[37]) })?;
        let substeps = rec[38]
            .parse()
            .map_err(|_| CsvLogError::Format { line, message: format!("bad substeps {:?}", &rec[38]) })?;
        out.push(SimLogRecord {
            t: num(0)?,
            position: v3(1)?,
            position_desired: v3(4)?,
            velocity: v3(7)?,
            attitude: Quat::new(num(10)?, num(11)?, num(12)?, num(13)?),
            euler: EulerZyx {
                roll: num(14)?,
                pitch: num(15)?,
                yaw: num(16)?,
                near_gimbal_lock: parse_flag(&rec[17], line)?,
            },
            angular_velocity: v3(18)?,
            command: ActuatorCommand::new([num(21)?, num(22)?, num(23)?, num(24)?], [num(25)?, num(26)?]),
            fz_cmd: num(27)?,
            torque_cmd: v3(28)?,
            saturation: SaturationReport {
                clamped: [
                    parse_flag(&rec[31], line)?,
                    parse_flag(&rec[32], line)?,
                    parse_flag(&rec[33], line)?,
                    parse_flag(&rec[34], line)?,
                ],
                tilt_exceeded: [parse_flag(&rec[35], line)?, parse_flag(&rec[36], line)?],
            },
            mode,
            substeps,
        });
    }
    Ok(out)
}

pub fn read_csv(path: &Path) -> Result<Vec<SimLogRecord>, CsvLogError> {
    read_records(File::open(path)?)
}
