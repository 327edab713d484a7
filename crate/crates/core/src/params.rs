//! Physical and controller constants.
//!
//! Defaults reproduce the reference vehicle: a 5 kg airframe with
//! 0.2539 m arms and the gain set used for the circle-tracking runs.

use core::fmt;

use nalgebra::{Matrix3, Vector3};

/// Physical constants of the airframe. All units SI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleParams {
    /// Mass (kg).
    pub mass: f64,
    /// Gravitational acceleration (m/s^2).
    pub gravity: f64,
    /// Lateral arm length `l` (m).
    pub arm_length: f64,
    /// Height of the tilting top rotors above the center of mass, `b1` (m).
    pub top_offset: f64,
    /// Depth of the fixed bottom rotors below the center of mass, `b2` (m).
    pub bottom_offset: f64,
    /// Principal moments of inertia (kg m^2).
    pub inertia: Vector3<f64>,
    /// Rotor torque-to-thrust ratio `k_r` (m).
    pub torque_ratio: f64,
}

/// Gains of the position loop and the cascaded attitude loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerGains {
    pub k_p: f64,
    pub k_d: f64,
    /// Attitude (outer) loop proportional gain.
    pub k_p_q: f64,
    /// Rate (inner) loop proportional gains, diagonal.
    pub k_p_w: Vector3<f64>,
    /// Rate (inner) loop derivative gains, diagonal.
    pub k_d_w: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamError {
    NotFinite { field: &'static str, value: f64 },
    NotPositive { field: &'static str, value: f64 },
    Negative { field: &'static str, value: f64 },
}

impl ParamError {
    /// Config key of the offending field.
    pub fn field(&self) -> &'static str {
        match *self {
            ParamError::NotFinite { field, .. }
            | ParamError::NotPositive { field, .. }
            | ParamError::Negative { field, .. } => field,
        }
    }
}

impl fmt::Display for ParamError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamError::NotFinite { field, value } => write!(f, "{field} must be finite, got {value}"),
            ParamError::NotPositive { field, value } => write!(f, "{field} must be > 0, got {value}"),
            ParamError::Negative { field, value } => write!(f, "{field} must be >= 0, got {value}"),
        }
    }
}

impl core::error::Error for ParamError {}

fn positive(field: &'static str, value: f64) -> Result<(), ParamError> {
    if !value.is_finite() {
        Err(ParamError::NotFinite { field, value })
    } else if value <= 0.0 {
        Err(ParamError::NotPositive { field, value })
    } else {
        Ok(())
    }
}

fn non_negative(field: &'static str, value: f64) -> Result<(), ParamError> {
    if !value.is_finite() {
        Err(ParamError::NotFinite { field, value })
    } else if value < 0.0 {
        Err(ParamError::Negative { field, value })
    } else {
        Ok(())
    }
}

fn positive_diag(fields: [&'static str; 3], v: &Vector3<f64>) -> Result<(), ParamError> {
    fields.iter().zip(v.iter()).try_for_each(|(name, x)| positive(name, *x))
}

impl Default for VehicleParams {
    fn default() -> Self {
        let top_offset = 0.14838;
        Self {
            mass: 5.0,
            gravity: 9.8,
            arm_length: 0.2539,
            top_offset,
            // b2 drops out of every torque term, any positive value behaves the same.
            bottom_offset: top_offset,
            inertia: Vector3::new(0.366, 0.171, 0.391),
            torque_ratio: 0.0008,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        positive("m", self.mass)?;
        positive("g", self.gravity)?;
        positive("l", self.arm_length)?;
        positive("b1", self.top_offset)?;
        non_negative("b2", self.bottom_offset)?;
        positive_diag(["J[0]", "J[1]", "J[2]"], &self.inertia)?;
        non_negative("k_r", self.torque_ratio)
    }

    /// `m g`, the hover thrust (N).
    pub fn weight(&self) -> f64 {
        self.mass * self.gravity
    }

    pub fn inertia_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&self.inertia)
    }
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            k_p: 16.0,
            k_d: 10.0,
            k_p_q: 10.0,
            k_p_w: Vector3::new(2.5, 2.0, 5.0),
            k_d_w: Vector3::new(0.1, 0.2, 0.1),
        }
    }
}

impl ControllerGains {
    pub fn validate(&self) -> Result<(), ParamError> {
        positive("k_p", self.k_p)?;
        positive("k_d", self.k_d)?;
        positive("k_p_q", self.k_p_q)?;
        positive_diag(["K_p_w[0]", "K_p_w[1]", "K_p_w[2]"], &self.k_p_w)?;
        positive_diag(["K_d_w[0]", "K_d_w[1]", "K_d_w[2]"], &self.k_d_w)
    }
}

/// Reference vehicle and gain set.
pub fn default_params() -> (VehicleParams, ControllerGains) {
    (VehicleParams::default(), ControllerGains::default())
}
