//! Deterministic closed-loop scenario runner.
//!
//! Every control step runs, in order: reference, position law, desired
//! attitude, attitude error, outer loop, rate loop, `F_z` projection (using
//! this step's `tau_y / b1` as the lateral body force) and allocation for
//! the active failure mode. The resulting command is held while the plant
//! is integrated over the physics substeps.

use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;
use core::fmt;

use nalgebra::Vector3;

use crate::actuation::{forward_wrench, ActuatorCommand, SaturationReport};
use crate::allocation::{AllocationError, Allocator, FailureMode, ReducedWrench};
use crate::attitude::{attitude_error, inner_loop, outer_loop, RateDerivative, RateLoopOutput, RateLoopState};
use crate::params::{ControllerGains, ParamError, VehicleParams};
use crate::position::{desired_attitude, position_law, project_fz, DesiredAttitude, Trajectory};
use crate::rigid_body::{rk4_step, Quat, RigidBodyState};

/// Pitch closer than this to +-pi/2 is flagged as near gimbal lock.
pub const GIMBAL_MARGIN: f64 = 1e-6;

/// ZYX (yaw, then pitch, then roll) Euler angles in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerZyx {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub near_gimbal_lock: bool,
}

pub fn quat_to_euler_zyx(q: &Quat) -> EulerZyx {
    let (w, x, y, z) = (q.w, q.i, q.j, q.k);
    let roll = (2.0 * (w * x + y * z)).atan2(1.0 - 2.0 * (x * x + y * y));
    let sin_pitch = (2.0 * (w * y - z * x)).clamp(-1.0, 1.0);
    let pitch = sin_pitch.asin();
    let yaw = (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z));
    EulerZyx {
        roll,
        pitch,
        yaw,
        near_gimbal_lock: pitch.abs() > FRAC_PI_2 - GIMBAL_MARGIN,
    }
}

/// A failure mode switched on at a given time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FailureInjection {
    pub mode: FailureMode,
    /// Seconds from the start of the run.
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub trajectory: Trajectory,
    /// Run length (s).
    pub duration: f64,
    pub physics_dt: f64,
    pub control_dt: f64,
    pub failure: Option<FailureInjection>,
    pub initial_state: RigidBodyState,
    pub rate_derivative: RateDerivative,
}

impl ScenarioConfig {
    /// Starts at rest at the origin, level, 1 ms physics and control steps.
    pub fn new(trajectory: Trajectory, duration: f64) -> Self {
        Self {
            trajectory,
            duration,
            physics_dt: 1e-3,
            control_dt: 1e-3,
            failure: None,
            initial_state: RigidBodyState::default(),
            rate_derivative: RateDerivative::default(),
        }
    }

    /// Reference circle from the origin for 40 s.
    pub fn circle() -> Self {
        Self::new(Trajectory::Circle, 40.0)
    }

    /// Number of physics substeps per control step.
    pub fn substeps(&self) -> Result<u32, ConfigError> {
        if !(self.physics_dt > 0.0 && self.physics_dt.is_finite()) {
            return Err(ConfigError::BadStep { name: "physics_dt", value: self.physics_dt });
        }
        if !(self.control_dt > 0.0 && self.control_dt.is_finite()) {
            return Err(ConfigError::BadStep { name: "control_dt", value: self.control_dt });
        }
        let ratio = self.control_dt / self.physics_dt;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio {
            return Err(ConfigError::StepsNotCommensurate {
                physics_dt: self.physics_dt,
                control_dt: self.control_dt,
            });
        }
        Ok(n as u32)
    }

    /// Number of control steps; each produces one log record.
    pub fn control_steps(&self) -> Result<usize, ConfigError> {
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(ConfigError::BadDuration(self.duration));
        }
        Ok((self.duration / self.control_dt - 1e-9).ceil().max(0.0) as usize)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.substeps()?;
        self.control_steps()?;
        if let Some(f) = &self.failure {
            if !(f.time >= 0.0 && f.time.is_finite()) {
                return Err(ConfigError::BadFailureTime(f.time));
            }
        }
        let q = self.initial_state.attitude;
        let norm = (q.w * q.w + q.i * q.i + q.j * q.j + q.k * q.k).sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(ConfigError::InitialAttitudeNotUnit(norm));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    BadDuration(f64),
    BadStep { name: &'static str, value: f64 },
    StepsNotCommensurate { physics_dt: f64, control_dt: f64 },
    BadFailureTime(f64),
    InitialAttitudeNotUnit(f64),
    Params(ParamError),
    Allocation(AllocationError),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::BadDuration(d) => write!(f, "duration must be finite and >= 0, got {d}"),
            ConfigError::BadStep { name, value } => write!(f, "{name} must be finite and > 0, got {value}"),
            ConfigError::StepsNotCommensurate { physics_dt, control_dt } => write!(
                f,
                "control_dt ({control_dt}) must be an integer multiple of physics_dt ({physics_dt})"
            ),
            ConfigError::BadFailureTime(t) => write!(f, "failure time must be finite and >= 0, got {t}"),
            ConfigError::InitialAttitudeNotUnit(n) => write!(f, "initial attitude quaternion has norm {n}"),
            ConfigError::Params(e) => write!(f, "{e}"),
            ConfigError::Allocation(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for ConfigError {}

impl From<ParamError> for ConfigError {
    fn from(e: ParamError) -> Self {
        ConfigError::Params(e)
    }
}

impl From<AllocationError> for ConfigError {
    fn from(e: AllocationError) -> Self {
        ConfigError::Allocation(e)
    }
}

/// State and command at one control step, taken before integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimLogRecord {
    pub t: f64,
    pub position: Vector3<f64>,
    pub position_desired: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub attitude: Quat,
    pub euler: EulerZyx,
    pub angular_velocity: Vector3<f64>,
    pub command: ActuatorCommand,
    pub fz_cmd: f64,
    pub torque_cmd: Vector3<f64>,
    pub saturation: SaturationReport,
    pub mode: FailureMode,
    /// Physics substeps integrated after this record.
    pub substeps: u32,
}

impl SimLogRecord {
    pub fn position_error(&self) -> f64 {
        (self.position - self.position_desired).norm()
    }
}

/// Controller internals of the last control step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlTrace {
    pub force_desired: Vector3<f64>,
    pub desired_attitude: DesiredAttitude,
    /// True when the desired attitude was held from the previous step.
    pub attitude_held: bool,
    pub omega_desired: Vector3<f64>,
    pub rate: RateLoopOutput,
}

/// A running scenario; [`run_scenario`] drives it to completion.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: ScenarioConfig,
    params: VehicleParams,
    gains: ControllerGains,
    allocator: Allocator,
    state: RigidBodyState,
    rate_state: RateLoopState,
    desired: Option<DesiredAttitude>,
    substeps: u32,
    total_steps: usize,
    step: usize,
    last_trace: Option<ControlTrace>,
}

impl Simulation {
    pub fn new(config: ScenarioConfig, params: VehicleParams, gains: ControllerGains) -> Result<Self, ConfigError> {
        config.validate()?;
        params.validate()?;
        gains.validate()?;
        let allocator = Allocator::new(&params)?;
        Ok(Self {
            substeps: config.substeps()?,
            total_steps: config.control_steps()?,
            state: config.initial_state,
            config,
            params,
            gains,
            allocator,
            rate_state: RateLoopState::new(),
            desired: None,
            step: 0,
            last_trace: None,
        })
    }

    pub fn state(&self) -> &RigidBodyState {
        &self.state
    }

    pub fn params(&self) -> &VehicleParams {
        &self.params
    }

    pub fn gains(&self) -> &ControllerGains {
        &self.gains
    }

    pub fn last_trace(&self) -> Option<&ControlTrace> {
        self.last_trace.as_ref()
    }

    pub fn is_finished(&self) -> bool {
        self.step >= self.total_steps
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.config.control_dt
    }

    fn active_mode(&self, t: f64) -> FailureMode {
        match self.config.failure {
            Some(f) if t >= f.time - 1e-9 * self.config.control_dt => f.mode,
            _ => FailureMode::Nominal,
        }
    }

    /// Runs one control step and its physics substeps. Returns the record
    /// for the state at the start of the step, or `None` when finished.
    pub fn step(&mut self) -> Option<SimLogRecord> {
        if self.is_finished() {
            return None;
        }
        let t = self.time();
        let mode = self.active_mode(t);
        let s = self.state;
        let reference = self.config.trajectory.sample(t);

        let force_desired = position_law(&s, &reference, &self.gains, &self.params);
        let (desired, attitude_held) = match desired_attitude(&force_desired, reference.heading) {
            Ok(d) => (d, false),
            Err(_) => {
                let held = self.desired.unwrap_or(DesiredAttitude {
                    rotation: s.rotation(),
                    quaternion: s.attitude,
                });
                (held, true)
            }
        };
        self.desired = Some(desired);

        let error = attitude_error(&s.attitude, &desired.quaternion);
        let omega_desired = outer_loop(&error, self.gains.k_p_q);
        let rate = inner_loop(
            &s.angular_velocity,
            &omega_desired,
            &mut self.rate_state,
            self.config.control_dt,
            &self.params.inertia,
            &self.gains,
            self.config.rate_derivative,
        );
        let fx_body = rate.torque.y / self.params.top_offset;
        let fz = project_fz(&force_desired, &s.rotation(), fx_body);
        let allocation = self.allocator.allocate(&ReducedWrench::new(fz, rate.torque), mode);
        let command = allocation.command.with_failed_zeroed(mode);

        let wrench = forward_wrench(&command, &self.params);
        let mut next = s;
        for _ in 0..self.substeps {
            next = rk4_step(&next, &wrench, self.config.physics_dt, &self.params);
        }
        self.state = next;
        self.step += 1;
        self.last_trace = Some(ControlTrace {
            force_desired,
            desired_attitude: desired,
            attitude_held,
            omega_desired,
            rate,
        });

        Some(SimLogRecord {
            t,
            position: s.position,
            position_desired: reference.position,
            velocity: s.velocity,
            attitude: s.attitude,
            euler: quat_to_euler_zyx(&s.attitude),
            angular_velocity: s.angular_velocity,
            command,
            fz_cmd: fz,
            torque_cmd: rate.torque,
            saturation: allocation.report,
            mode,
            substeps: self.substeps,
        })
    }
}

impl Iterator for Simulation {
    type Item = SimLogRecord;

    fn next(&mut self) -> Option<SimLogRecord> {
        self.step()
    }
}

/// Runs a whole scenario and returns one record per control step.
pub fn run_scenario(
    config: &ScenarioConfig,
    params: &VehicleParams,
    gains: &ControllerGains,
) -> Result<Vec<SimLogRecord>, ConfigError> {
    Ok(Simulation::new(config.clone(), *params, *gains)?.collect())
}

/// Headline numbers of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub final_position_error: f64,
    /// RMS position error over the second half of the records.
    pub rms_error_second_half: f64,
    /// Max position error for `t >= 20 s`; `None` for shorter runs.
    pub max_error_after_20s: Option<f64>,
    pub max_thrust: f64,
    pub saturation_events: usize,
}

pub fn summarize(records: &[SimLogRecord]) -> Option<Summary> {
    let last = records.last()?;
    let tail = &records[records.len() / 2..];
    let rms = (tail.iter().map(|r| r.position_error().powi(2)).sum::<f64>() / tail.len() as f64).sqrt();
    let max_error_after_20s = records
        .iter()
        .filter(|r| r.t >= 20.0)
        .map(SimLogRecord::position_error)
        .reduce(f64::max);
    let max_thrust = records
        .iter()
        .flat_map(|r| r.command.thrust)
        .fold(0.0, f64::max);
    let saturation_events = records.iter().map(|r| r.saturation.event_count()).sum();
    Some(Summary {
        final_position_error: last.position_error(),
        rms_error_second_half: rms,
        max_error_after_20s,
        max_thrust,
        saturation_events,
    })
}

/// RMS position error over records with `from <= t < to`.
pub fn rms_position_error(records: &[SimLogRecord], from: f64, to: f64) -> Option<f64> {
    let (sum, n) = records
        .iter()
        .filter(|r| r.t >= from && r.t < to)
        .fold((0.0, 0usize), |(s, n), r| (s + r.position_error().powi(2), n + 1));
    (n > 0).then(|| (sum / n as f64).sqrt())
}
