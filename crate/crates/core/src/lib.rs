//! Dynamics, control allocation and cascaded flight control for a
//! Bi-Quadcopter: a Bicopter (two servo-tilted top rotors) with two fixed
//! bottom rotors sharing the lift.
//!
//! The crate is `no_std` and only needs `alloc` for the allocation matrices
//! and simulation logs. File formats and the command line live in the
//! `biquadcopter-sim` crate.
//!
//! Frames: the inertial frame is North-West-Up, the body frame sits at the
//! center of mass. Quaternions are Hamilton, scalar first, body to inertial.
//!
//! ```
//! use biquadcopter_core::allocation::{Allocator, FailureMode, ReducedWrench};
//! use biquadcopter_core::params::VehicleParams;
//! use nalgebra::Vector3;
//!
//! let params = VehicleParams::default();
//! let allocator = Allocator::new(&params).unwrap();
//! let hover = ReducedWrench::new(params.weight(), Vector3::zeros());
//! let out = allocator.allocate(&hover, FailureMode::Nominal);
//! assert!((out.command.thrust[0] - 12.25).abs() < 1e-12);
//! ```
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod actuation;
pub mod allocation;
pub mod attitude;
pub mod params;
pub mod position;
pub mod rigid_body;
pub mod sim;

pub use actuation::{ActuatorCommand, ForceDecomposition};
pub use allocation::{Allocator, FailureMode, ReducedWrench};
pub use params::{ControllerGains, VehicleParams};
pub use rigid_body::{RigidBodyState, Wrench};
