//! Vehicle parameters and controller gains as TOML.
//!
//! ```toml
//! [vehicle]
//! m = 5.0
//! J = [0.366, 0.171, 0.391]
//!
//! [gains]
//! K_d_w = [0.1, 0.2, 0.1]
//! ```
//!
//! Every key is optional and falls back to the built-in defaults. A
//! missing `b2` follows `b1`. The full schema is in `docs/config.md`.

use biquadcopter_core::params::{ControllerGains, ParamError, VehicleParams};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParamsFileError {
    #[error("cannot parse parameter file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid parameter: {0}")]
    Invalid(#[from] ParamError),
    #[error("cannot read parameter file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct Document {
    #[serde(default)]
    vehicle: VehicleSection,
    #[serde(default)]
    gains: GainsSection,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct VehicleSection {
    m: Option<f64>,
    g: Option<f64>,
    l: Option<f64>,
    b1: Option<f64>,
    b2: Option<f64>,
    #[serde(rename = "J")]
    j: Option<[f64; 3]>,
    k_r: Option<f64>,
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct GainsSection {
    k_p: Option<f64>,
    k_d: Option<f64>,
    k_p_q: Option<f64>,
    #[serde(rename = "K_p_w")]
    k_p_w: Option<[f64; 3]>,
    #[serde(rename = "K_d_w")]
    k_d_w: Option<[f64; 3]>,
}

/// Parses and validates a parameter document.
pub fn load_params(text: &str) -> Result<(VehicleParams, ControllerGains), ParamsFileError> {
    let doc: Document = toml::from_str(text)?;
    let mut p = VehicleParams::default();
    let v = doc.vehicle;
    p.mass = v.m.unwrap_or(p.mass);
    p.gravity = v.g.unwrap_or(p.gravity);
    p.arm_length = v.l.unwrap_or(p.arm_length);
    p.top_offset = v.b1.unwrap_or(p.top_offset);
    p.bottom_offset = v.b2.unwrap_or(p.top_offset);
    p.inertia = v.j.map(Vector3::from).unwrap_or(p.inertia);
    p.torque_ratio = v.k_r.unwrap_or(p.torque_ratio);

    let mut g = ControllerGains::default();
    let s = doc.gains;
    g.k_p = s.k_p.unwrap_or(g.k_p);
    g.k_d = s.k_d.unwrap_or(g.k_d);
    g.k_p_q = s.k_p_q.unwrap_or(g.k_p_q);
    g.k_p_w = s.k_p_w.map(Vector3::from).unwrap_or(g.k_p_w);
    g.k_d_w = s.k_d_w.map(Vector3::from).unwrap_or(g.k_d_w);

    p.validate()?;
    g.validate()?;
    Ok((p, g))
}

pub fn load_params_file(path: &std::path::Path) -> Result<(VehicleParams, ControllerGains), ParamsFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| ParamsFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_params(&text)
}

/// Writes every key explicitly; `load_params` reads it back unchanged.
pub fn to_toml(params: &VehicleParams, gains: &ControllerGains) -> String {
    let doc = Document {
        vehicle: VehicleSection {
            m: Some(params.mass),
            g: Some(params.gravity),
            l: Some(params.arm_length),
            b1: Some(params.top_offset),
            b2: Some(params.bottom_offset),
            j: Some(params.inertia.into()),
            k_r: Some(params.torque_ratio),
        },
        gains: GainsSection {
            k_p: Some(gains.k_p),
            k_d: Some(gains.k_d),
            k_p_q: Some(gains.k_p_q),
            k_p_w: Some(gains.k_p_w.into()),
            k_d_w: Some(gains.k_d_w.into()),
        },
    };
    toml::to_string(&doc).expect("parameter document serializes")
}
