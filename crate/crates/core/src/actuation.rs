//! Actuator forward model.
//!
//! Rotors 1 and 2 sit on top at `(0, +l, b1)` and `(0, -l, b1)` and tilt
//! about the body Y axis. Rotors 3 and 4 are fixed below at `(0, +l, -b2)`
//! and `(0, -l, -b2)`. Rotors 1 and 4 spin counterclockwise, 2 and 3
//! clockwise.
//!
//! Splitting each tilting thrust into a vertical and a lateral part
//! (`F_iV = f_i cos b_i`, `F_iL = f_i sin b_i`) makes the wrench linear in
//! the decomposed forces; see [`crate::allocation`].

use core::f64::consts::{FRAC_PI_2, PI};
use core::fmt;

use nalgebra::{Matrix3, Vector3};

use crate::allocation::FailureMode;
use crate::params::VehicleParams;
use crate::rigid_body::Wrench;

/// Default servo range, symmetric about vertical.
pub const DEFAULT_TILT_LIMIT: f64 = FRAC_PI_2;

/// Actuator inputs: thrust magnitudes (N) and top-rotor tilt angles (rad).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActuatorCommand {
    pub thrust: [f64; 4],
    pub tilt: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CommandError {
    NegativeThrust { rotor: usize, value: f64 },
    TiltOutOfRange { servo: usize, value: f64 },
}

impl fmt::Display for CommandError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CommandError::NegativeThrust { rotor, value } => {
                write!(f, "thrust f{rotor} = {value} is negative")
            }
            CommandError::TiltOutOfRange { servo, value } => {
                write!(f, "tilt beta{servo} = {value} is outside [-pi, pi]")
            }
        }
    }
}

impl core::error::Error for CommandError {}

impl ActuatorCommand {
    pub fn new(thrust: [f64; 4], tilt: [f64; 2]) -> Self {
        Self { thrust, tilt }
    }

    pub fn validate(&self) -> Result<(), CommandError> {
        for (i, &f) in self.thrust.iter().enumerate() {
            if !(f >= 0.0) {
                return Err(CommandError::NegativeThrust { rotor: i + 1, value: f });
            }
        }
        for (i, &b) in self.tilt.iter().enumerate() {
            if !(-PI..=PI).contains(&b) {
                return Err(CommandError::TiltOutOfRange { servo: i + 1, value: b });
            }
        }
        Ok(())
    }

    /// Same command with the thrust of every rotor lost in `mode` set to zero.
    pub fn with_failed_zeroed(mut self, mode: FailureMode) -> Self {
        for rotor in mode.failed_rotors() {
            self.thrust[rotor - 1] = 0.0;
        }
        self
    }

    pub fn total_thrust(&self) -> f64 {
        self.thrust.iter().sum()
    }
}

/// Rotor positions in the body frame (m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmGeometry {
    pub arms: [Vector3<f64>; 4],
}

impl ArmGeometry {
    pub fn new(params: &VehicleParams) -> Self {
        let (l, b1, b2) = (params.arm_length, params.top_offset, params.bottom_offset);
        Self {
            arms: [
                Vector3::new(0.0, l, b1),
                Vector3::new(0.0, -l, b1),
                Vector3::new(0.0, l, -b2),
                Vector3::new(0.0, -l, -b2),
            ],
        }
    }
}

/// Servo rotation about the body Y axis.
pub fn tilt_rotation(beta: f64) -> Matrix3<f64> {
    let (s, c) = beta.sin_cos();
    Matrix3::new(
        c, 0.0, s, //
        0.0, 1.0, 0.0, //
        -s, 0.0, c,
    )
}

/// Body wrench produced by `u`, written out per component.
///
/// `F_y` is identically zero and `F_x = tau_y / b1`, which is why only
/// `(F_z, tau)` can be allocated independently.
pub fn forward_wrench(u: &ActuatorCommand, params: &VehicleParams) -> Wrench {
    let [f1v, f1l, f2v, f2l, f3, f4] = decompose(u).expand();
    let (l, b1, kr) = (params.arm_length, params.top_offset, params.torque_ratio);

    let force = Vector3::new(f1l + f2l, 0.0, f1v + f2v + f3 + f4);
    let torque = Vector3::new(
        l * (f1v - f2v) + l * (f3 - f4) - kr * (f1l - f2l),
        b1 * (f1l + f2l),
        kr * (f3 - f4) - kr * (f1v - f2v) - l * (f1l - f2l),
    );
    Wrench::new(force, torque)
}

/// Reference evaluation of the wrench from rotated thrust vectors and lever
/// arm cross products. Kept independent of [`forward_wrench`] so each can
/// check the other.
pub fn forward_wrench_vector_oracle(u: &ActuatorCommand, params: &VehicleParams) -> Wrench {
    let geometry = ArmGeometry::new(params);
    let thrust_vectors = [
        tilt_rotation(u.tilt[0]) * Vector3::new(0.0, 0.0, u.thrust[0]),
        tilt_rotation(u.tilt[1]) * Vector3::new(0.0, 0.0, u.thrust[1]),
        Vector3::new(0.0, 0.0, u.thrust[2]),
        Vector3::new(0.0, 0.0, u.thrust[3]),
    ];
    // reaction torque sign per rotor: CCW rotors push negative
    let spin = [-1.0, 1.0, 1.0, -1.0];

    let mut force = Vector3::zeros();
    let mut torque = Vector3::zeros();
    for i in 0..4 {
        force += thrust_vectors[i];
        torque += geometry.arms[i].cross(&thrust_vectors[i]);
        torque += thrust_vectors[i] * (spin[i] * params.torque_ratio);
    }
    Wrench::new(force, torque)
}

/// Decomposed rotor forces `[F1V, F1L, F2V, F2L, F3, F4]`, restricted to
/// the rotors that are still available in `mode`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceDecomposition {
    mode: FailureMode,
    full: [f64; 6],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LengthMismatch {
    pub expected: usize,
    pub got: usize,
}

impl fmt::Display for LengthMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "expected {} decomposed forces, got {}", self.expected, self.got)
    }
}

impl core::error::Error for LengthMismatch {}

impl ForceDecomposition {
    pub fn nominal(entries: [f64; 6]) -> Self {
        Self { mode: FailureMode::Nominal, full: entries }
    }

    /// Entries in the column order of `mode`'s allocation matrix.
    pub fn new(mode: FailureMode, entries: &[f64]) -> Result<Self, LengthMismatch> {
        let columns = mode.columns();
        if entries.len() != columns.len() {
            return Err(LengthMismatch { expected: columns.len(), got: entries.len() });
        }
        let mut full = [0.0; 6];
        for (&c, &x) in columns.iter().zip(entries) {
            full[c] = x;
        }
        Ok(Self { mode, full })
    }

    pub fn mode(&self) -> FailureMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.mode.columns().len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Entry for column `i` of the mode's allocation matrix.
    pub fn get(&self, i: usize) -> Option<f64> {
        self.mode.columns().get(i).map(|&c| self.full[c])
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.mode.columns().iter().map(move |&c| self.full[c])
    }

    /// Full six-entry vector, zeros in place of failed rotors.
    pub fn expand(&self) -> [f64; 6] {
        self.full
    }
}

pub fn decompose(u: &ActuatorCommand) -> ForceDecomposition {
    let (s1, c1) = u.tilt[0].sin_cos();
    let (s2, c2) = u.tilt[1].sin_cos();
    ForceDecomposition::nominal([
        u.thrust[0] * c1,
        u.thrust[0] * s1,
        u.thrust[1] * c2,
        u.thrust[1] * s2,
        u.thrust[2],
        u.thrust[3],
    ])
}

/// Flags raised while turning decomposed forces back into a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SaturationReport {
    /// Rotor `i` asked for negative thrust and was clamped to zero.
    pub clamped: [bool; 4],
    /// Servo `i` was commanded past the tilt limit.
    pub tilt_exceeded: [bool; 2],
}

impl SaturationReport {
    /// True when the delivered wrench differs from the request.
    pub fn is_saturated(&self) -> bool {
        self.clamped.iter().any(|&c| c)
    }

    pub fn event_count(&self) -> usize {
        self.clamped.iter().chain(self.tilt_exceeded.iter()).filter(|&&x| x).count()
    }
}

/// [`recompose_with_limit`] with [`DEFAULT_TILT_LIMIT`].
pub fn recompose(fd: &ForceDecomposition) -> (ActuatorCommand, SaturationReport) {
    recompose_with_limit(fd, DEFAULT_TILT_LIMIT)
}

/// Thrust magnitude and tilt of each top rotor from its vertical and
/// lateral parts; bottom thrusts pass through.
///
/// Bottom rotors cannot reverse, so negative requests are clamped to zero
/// and reported. Tilts beyond `tilt_limit` are kept but flagged. Failed
/// rotors always come out at zero thrust.
pub fn recompose_with_limit(fd: &ForceDecomposition, tilt_limit: f64) -> (ActuatorCommand, SaturationReport) {
    let [f1v, f1l, f2v, f2l, f3, f4] = fd.expand();
    let mut report = SaturationReport::default();

    let tilt = [f1l.atan2(f1v), f2l.atan2(f2v)];
    for (flag, beta) in report.tilt_exceeded.iter_mut().zip(tilt) {
        *flag = beta.abs() > tilt_limit;
    }

    let mut thrust = [f1v.hypot(f1l), f2v.hypot(f2l), f3, f4];
    for i in 2..4 {
        if thrust[i] < 0.0 {
            thrust[i] = 0.0;
            report.clamped[i] = true;
        }
    }

    let command = ActuatorCommand { thrust, tilt }.with_failed_zeroed(fd.mode());
    (command, report)
}
