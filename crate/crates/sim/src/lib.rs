//! File formats and the command line around `biquadcopter-core`.
//!
//! - [`config`]: TOML vehicle parameters and controller gains.
//! - [`csv_log`]: the per-step simulation log.
//! - [`trajectory`]: reference trajectories read from CSV.
//! - [`cli`]: argument parsing and scenario assembly for the binary.

pub mod cli;
pub mod config;
pub mod csv_log;
pub mod trajectory;

use biquadcopter_core::allocation::{BottomRotor, FailureMode};

/// Short token used on the command line and in the CSV `mode` column.
pub fn mode_token(mode: FailureMode) -> &'static str {
    match mode {
        FailureMode::Nominal => "none",
        FailureMode::OneBottomOut(BottomRotor::Three) => "bottom3",
        FailureMode::OneBottomOut(BottomRotor::Four) => "bottom4",
        FailureMode::BothBottomOut => "bottom-both",
    }
}

pub fn parse_mode_token(s: &str) -> Option<FailureMode> {
    FailureMode::ALL.into_iter().find(|&m| mode_token(m) == s)
}
