//! Cascaded quaternion attitude control.
//!
//! The outer loop turns the attitude error into a body-rate setpoint,
//! `w_d = -k_p_q e_err`. The inner loop is a PD law on the rate error with
//! gyroscopic compensation,
//! `tau = -K_p (w - w_d) - K_d d/dt (w - w_d) + w x J w`.

use core::f64::consts::PI;

use nalgebra::Vector3;

use crate::params::ControllerGains;
use crate::rigid_body::{quat_conjugate, quat_multiply, Quat};

/// Below this angle `phi / sin(phi/2)` is replaced by its limit 2.
pub const SMALL_ANGLE: f64 = 1e-6;

/// Relative rotation from the commanded to the actual attitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttitudeError {
    /// Rotation vector of the error, shortest way round (rad).
    pub axis_angle: Vector3<f64>,
    /// `2 atan2(|eps_e|, eta_e)`, in `[0, 2 pi]`.
    pub angle: f64,
    pub eta: f64,
    pub epsilon: Vector3<f64>,
}

/// Error quaternion `q_e = q_c* (x) q` and its rotation vector.
///
/// `e_err = sign(eta_e) * phi / sin(phi/2) * eps_e` with `sign(0) = +1`.
/// The magnitude uses the shorter of the two equivalent angles, so `q` and
/// `-q` give the same error.
pub fn attitude_error(q: &Quat, q_c: &Quat) -> AttitudeError {
    let q_e = quat_multiply(&quat_conjugate(q_c), q);
    let eta = q_e.w;
    let epsilon = q_e.imag();
    let eps_norm = epsilon.norm();
    let angle = 2.0 * eps_norm.atan2(eta);
    let shortest = if angle > PI { 2.0 * PI - angle } else { angle };
    let factor = if shortest < SMALL_ANGLE { 2.0 } else { shortest / (shortest / 2.0).sin() };
    let sign = if eta < 0.0 { -1.0 } else { 1.0 };
    AttitudeError { axis_angle: epsilon * (sign * factor), angle, eta, epsilon }
}

/// Body-rate setpoint `w_d = -k_p_q e_err`.
pub fn outer_loop(error: &AttitudeError, k_p_q: f64) -> Vector3<f64> {
    -error.axis_angle * k_p_q
}

/// How the rate loop realizes `d/dt (w - w_d)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RateDerivative {
    /// Backward difference of the measured rate error. With a held torque
    /// this feeds back `K_d / J` of the previous step's change and is only
    /// stable for `K_d < J` on every axis.
    BackwardDifference,
    /// Solve the loop `J w_dot = tau - w x J w` together with the control
    /// law: `w_dot = (J + K_d)^-1 (-K_p e + K_d w_d_dot)`, with the setpoint
    /// rate taken by backward difference. Reproduces the continuous-time
    /// law for any positive `K_d`.
    #[default]
    Implicit,
}

/// Memory of the rate loop between control steps.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RateLoopState {
    prev_error: Option<Vector3<f64>>,
    prev_setpoint: Option<Vector3<f64>>,
}

impl RateLoopState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_initialized(&self) -> bool {
        self.prev_error.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateLoopOutput {
    pub torque: Vector3<f64>,
    /// `w - w_d`.
    pub error: Vector3<f64>,
    /// Derivative of the rate error used in the law; zero on the first step.
    pub error_rate: Vector3<f64>,
}

/// Inner PD rate loop with gyroscopic compensation.
pub fn inner_loop(
    w: &Vector3<f64>,
    omega_d: &Vector3<f64>,
    state: &mut RateLoopState,
    dt: f64,
    inertia: &Vector3<f64>,
    gains: &ControllerGains,
    method: RateDerivative,
) -> RateLoopOutput {
    debug_assert!(dt > 0.0);
    let error = w - omega_d;
    let proportional = -gains.k_p_w.component_mul(&error);

    let error_rate = match (method, state.prev_error, state.prev_setpoint) {
        (RateDerivative::BackwardDifference, Some(prev), _) => (error - prev) / dt,
        (RateDerivative::Implicit, Some(_), Some(prev_setpoint)) => {
            let setpoint_rate = (omega_d - prev_setpoint) / dt;
            let accel = (proportional + gains.k_d_w.component_mul(&setpoint_rate))
                .component_div(&(inertia + gains.k_d_w));
            accel - setpoint_rate
        }
        _ => Vector3::zeros(),
    };
    state.prev_error = Some(error);
    state.prev_setpoint = Some(*omega_d);

    let gyroscopic = w.cross(&inertia.component_mul(w));
    let torque = proportional - gains.k_d_w.component_mul(&error_rate) + gyroscopic;
    RateLoopOutput { torque, error, error_rate }
}
