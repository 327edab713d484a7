//! Reference trajectories from CSV.
//!
//! Header `t,x,y,z,vx,vy,vz,ax,ay,az,psi`; velocity and acceleration
//! columns may be omitted and then read as zero. Times must be strictly
//! increasing. Samples are interpolated linearly and the end values are
//! held outside the table.

use std::fs::File;
use std::io;
use std::path::Path;

use biquadcopter_core::position::{ReferenceSignal, TrajectoryError, TrajectoryTable};
use nalgebra::Vector3;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrajectoryFileError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Table(#[from] TrajectoryError),
}

#[derive(Debug, Deserialize)]
struct Row {
    t: f64,
    x: f64,
    y: f64,
    z: f64,
    #[serde(default)]
    vx: f64,
    #[serde(default)]
    vy: f64,
    #[serde(default)]
    vz: f64,
    #[serde(default)]
    ax: f64,
    #[serde(default)]
    ay: f64,
    #[serde(default)]
    az: f64,
    psi: f64,
}

pub fn read_trajectory<R: io::Read>(source: R) -> Result<TrajectoryTable, TrajectoryFileError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        let r: Row = row?;
        rows.push((
            r.t,
            ReferenceSignal {
                position: Vector3::new(r.x, r.y, r.z),
                velocity: Vector3::new(r.vx, r.vy, r.vz),
                acceleration: Vector3::new(r.ax, r.ay, r.az),
                heading: r.psi,
            },
        ));
    }
    Ok(TrajectoryTable::new(rows)?)
}

pub fn read_trajectory_file(path: &Path) -> Result<TrajectoryTable, TrajectoryFileError> {
    read_trajectory(File::open(path)?)
}
