//! Position loop: PD force law, projection onto the body z axis and the
//! desired attitude that points the thrust axis along the demanded force.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_4, FRAC_PI_6};
use core::fmt;

use nalgebra::{Matrix3, Vector3};

use crate::params::{ControllerGains, VehicleParams};
use crate::rigid_body::{rotmat_to_quat, Quat, RigidBodyState};

/// Below this force magnitude (N) the thrust direction is undefined.
pub const MIN_FORCE: f64 = 1e-6;
/// Below this `|Z_bd x X_bc|` the heading is parallel to the thrust axis.
pub const MIN_HEADING_CROSS: f64 = 1e-6;

/// Desired position, its first two derivatives and heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSignal {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
    /// Heading angle (rad).
    pub heading: f64,
}

impl ReferenceSignal {
    pub fn hold(position: Vector3<f64>, heading: f64) -> Self {
        Self {
            position,
            velocity: Vector3::zeros(),
            acceleration: Vector3::zeros(),
            heading,
        }
    }

    fn lerp(&self, other: &Self, s: f64) -> Self {
        Self {
            position: self.position.lerp(&other.position, s),
            velocity: self.velocity.lerp(&other.velocity, s),
            acceleration: self.acceleration.lerp(&other.acceleration, s),
            heading: self.heading + (other.heading - self.heading) * s,
        }
    }
}

/// `F_des = -k_p (p - p_d) - k_d (v - v_d) + m g e3 + m a_d`, inertial frame.
pub fn position_law(
    s: &RigidBodyState,
    reference: &ReferenceSignal,
    gains: &ControllerGains,
    params: &VehicleParams,
) -> Vector3<f64> {
    let position_error = s.position - reference.position;
    let velocity_error = s.velocity - reference.velocity;
    -position_error * gains.k_p - velocity_error * gains.k_d
        + Vector3::new(0.0, 0.0, params.weight())
        + reference.acceleration * params.mass
}

/// Body-z force that, together with the lateral body force `fx_body`,
/// best realizes `f_des`: `(f_des - R fx e1) . (R e3)`.
pub fn project_fz(f_des: &Vector3<f64>, rotation: &Matrix3<f64>, fx_body: f64) -> f64 {
    let lateral = rotation.column(0) * fx_body;
    (f_des - lateral).dot(&rotation.column(2))
}

/// Commanded attitude, as a matrix and as a quaternion with `w >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesiredAttitude {
    pub rotation: Matrix3<f64>,
    pub quaternion: Quat,
}

impl DesiredAttitude {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), quaternion: Quat::identity() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DegenerateAttitude {
    /// `|F_des|` too small to define a thrust axis.
    NoThrust { magnitude: f64 },
    /// Heading vector parallel to the thrust axis.
    HeadingAlongThrust,
}

impl fmt::Display for DegenerateAttitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DegenerateAttitude::NoThrust { magnitude } => {
                write!(f, "desired force magnitude {magnitude:e} N defines no thrust axis")
            }
            DegenerateAttitude::HeadingAlongThrust => f.write_str("heading vector is parallel to the thrust axis"),
        }
    }
}

impl core::error::Error for DegenerateAttitude {}

/// Attitude whose z axis is `f_des / |f_des|` and whose x axis lies in the
/// plane of z and the heading vector `(cos psi, sin psi, 0)`.
pub fn desired_attitude(f_des: &Vector3<f64>, heading: f64) -> Result<DesiredAttitude, DegenerateAttitude> {
    let magnitude = f_des.norm();
    if !(magnitude > MIN_FORCE) {
        return Err(DegenerateAttitude::NoThrust { magnitude });
    }
    let z = f_des / magnitude;
    let (s, c) = heading.sin_cos();
    let x_heading = Vector3::new(c, s, 0.0);
    let y_raw = z.cross(&x_heading);
    let y_len = y_raw.norm();
    if !(y_len > MIN_HEADING_CROSS) {
        return Err(DegenerateAttitude::HeadingAlongThrust);
    }
    let y = y_raw / y_len;
    let x = y.cross(&z);
    let rotation = Matrix3::from_columns(&[x, y, z]);
    Ok(DesiredAttitude { rotation, quaternion: rotmat_to_quat(&rotation) })
}

/// Radius (m), height (m), angular rate (rad/s) and heading of the
/// reference circle.
pub const CIRCLE_RADIUS: f64 = 4.0;
pub const CIRCLE_HEIGHT: f64 = 4.0;
pub const CIRCLE_RATE: f64 = FRAC_PI_4;
pub const CIRCLE_HEADING: f64 = FRAC_PI_6;

/// Horizontal circle `(4 cos(pi t/4), 4 sin(pi t/4), 4)` with heading pi/6.
pub fn circle_reference(t: f64) -> ReferenceSignal {
    let (s, c) = (CIRCLE_RATE * t).sin_cos();
    let r = CIRCLE_RADIUS;
    let w = CIRCLE_RATE;
    ReferenceSignal {
        position: Vector3::new(r * c, r * s, CIRCLE_HEIGHT),
        velocity: Vector3::new(-r * w * s, r * w * c, 0.0),
        acceleration: Vector3::new(-r * w * w * c, -r * w * w * s, 0.0),
        heading: CIRCLE_HEADING,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrajectoryError {
    Empty,
    NotIncreasing { row: usize },
    NotFinite { row: usize },
}

impl fmt::Display for TrajectoryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrajectoryError::Empty => f.write_str("trajectory has no rows"),
            TrajectoryError::NotIncreasing { row } => write!(f, "row {row}: time is not strictly increasing"),
            TrajectoryError::NotFinite { row } => write!(f, "row {row}: non-finite value"),
        }
    }
}

impl core::error::Error for TrajectoryError {}

/// Time-indexed reference samples, linearly interpolated. Before the first
/// and after the last sample the end values are held.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable {
    times: Vec<f64>,
    samples: Vec<ReferenceSignal>,
}

impl TrajectoryTable {
    pub fn new(rows: Vec<(f64, ReferenceSignal)>) -> Result<Self, TrajectoryError> {
        if rows.is_empty() {
            return Err(TrajectoryError::Empty);
        }
        for (i, (t, r)) in rows.iter().enumerate() {
            let values = [*t, r.heading]
                .into_iter()
                .chain(r.position.iter().copied())
                .chain(r.velocity.iter().copied())
                .chain(r.acceleration.iter().copied());
            if values.into_iter().any(|x| !x.is_finite()) {
                return Err(TrajectoryError::NotFinite { row: i });
            }
            if i > 0 && *t <= rows[i - 1].0 {
                return Err(TrajectoryError::NotIncreasing { row: i });
            }
        }
        let (times, samples) = rows.into_iter().unzip();
        Ok(Self { times, samples })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Time of the last sample.
    pub fn end_time(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn sample(&self, t: f64) -> ReferenceSignal {
        let last = self.times.len() - 1;
        if t <= self.times[0] {
            return self.samples[0];
        }
        if t >= self.times[last] {
            return self.samples[last];
        }
        let hi = self.times.partition_point(|&x| x <= t);
        let lo = hi - 1;
        let s = (t - self.times[lo]) / (self.times[hi] - self.times[lo]);
        self.samples[lo].lerp(&self.samples[hi], s)
    }
}

/// Reference source for a scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum Trajectory {
    Hover { position: Vector3<f64>, heading: f64 },
    Circle,
    Table(TrajectoryTable),
}

impl Trajectory {
    pub fn sample(&self, t: f64) -> ReferenceSignal {
        match self {
            Trajectory::Hover { position, heading } => ReferenceSignal::hold(*position, *heading),
            Trajectory::Circle => circle_reference(t),
            Trajectory::Table(table) => table.sample(t),
        }
    }
}
