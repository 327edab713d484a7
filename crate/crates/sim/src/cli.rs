//! Command line of the `biquadcopter` binary.

use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context};
use biquadcopter_core::allocation::FailureMode;
use biquadcopter_core::attitude::RateDerivative;
use biquadcopter_core::params::default_params;
use biquadcopter_core::position::{Trajectory, CIRCLE_HEIGHT};
use biquadcopter_core::rigid_body::RigidBodyState;
use biquadcopter_core::sim::{run_scenario, summarize, FailureInjection, ScenarioConfig};
use clap::{Parser, ValueEnum};
use nalgebra::Vector3;

use crate::config::load_params_file;
use crate::csv_log::write_csv;
use crate::trajectory::read_trajectory_file;
use crate::{mode_token, parse_mode_token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioKind {
    /// Hold a fixed point, starting at rest on it.
    Hover,
    /// Radius 4 m circle at 4 m height, starting at rest at the origin.
    Circle,
    /// Reference read from `--trajectory`.
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RateDerivativeArg {
    Implicit,
    Backward,
}

impl From<RateDerivativeArg> for RateDerivative {
    fn from(a: RateDerivativeArg) -> Self {
        match a {
            RateDerivativeArg::Implicit => RateDerivative::Implicit,
            RateDerivativeArg::Backward => RateDerivative::BackwardDifference,
        }
    }
}

fn parse_failure(s: &str) -> Result<FailureMode, String> {
    parse_mode_token(s).ok_or_else(|| format!("expected one of none, bottom3, bottom4, bottom-both; got {s:?}"))
}

fn parse_vec3(s: &str) -> Result<Vector3<f64>, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z; got {s:?}"));
    }
    let mut v = Vector3::zeros();
    for (slot, part) in v.iter_mut().zip(parts) {
        *slot = part.trim().parse().map_err(|_| format!("not a number: {part:?}"))?;
    }
    Ok(v)
}

/// Closed-loop Bi-Quadcopter simulation.
#[derive(Debug, Parser)]
#[command(name = "biquadcopter", version, arg_required_else_help = true)]
pub struct Args {
    #[arg(value_enum)]
    pub scenario: ScenarioKind,
    /// Run length in seconds [default: 10 for hover, 40 for circle, last
    /// sample time for file].
    #[arg(long, allow_hyphen_values = true)]
    pub duration: Option<f64>,
    #[arg(long, default_value_t = 1e-3)]
    pub physics_dt: f64,
    /// Must be an integer multiple of the physics step.
    #[arg(long, default_value_t = 1e-3)]
    pub control_dt: f64,
    /// none, bottom3, bottom4 or bottom-both.
    #[arg(long, value_parser = parse_failure)]
    pub failure: Option<FailureMode>,
    /// Injection time in seconds [default: 0].
    #[arg(long, requires = "failure", allow_hyphen_values = true)]
    pub failure_time: Option<f64>,
    /// TOML file with vehicle parameters and gains.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// CSV log destination.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Reference CSV for the file scenario.
    #[arg(long, required_if_eq("scenario", "file"))]
    pub trajectory: Option<PathBuf>,
    /// Hover setpoint as x,y,z [default: 0,0,4].
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub hover_point: Option<Vector3<f64>>,
    /// Hover heading in radians [default: 0].
    #[arg(long, allow_hyphen_values = true)]
    pub psi: Option<f64>,
    /// Starting position as x,y,z, at rest and level.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub initial_position: Option<Vector3<f64>>,
    #[arg(long, value_enum, default_value_t = RateDerivativeArg::Implicit)]
    pub rate_derivative: RateDerivativeArg,
}

/// Turns parsed arguments into a scenario, reading any referenced files.
pub fn build_scenario(args: &Args) -> anyhow::Result<ScenarioConfig> {
    if args.scenario != ScenarioKind::Hover && (args.hover_point.is_some() || args.psi.is_some()) {
        bail!("--hover-point and --psi only apply to the hover scenario");
    }
    if args.scenario != ScenarioKind::File && args.trajectory.is_some() {
        bail!("--trajectory only applies to the file scenario");
    }
    if args.failure == Some(FailureMode::Nominal) && args.failure_time.is_some() {
        bail!("--failure-time needs a failure other than none");
    }

    let (trajectory, start, default_duration) = match args.scenario {
        ScenarioKind::Hover => {
            let position = args.hover_point.unwrap_or(Vector3::new(0.0, 0.0, CIRCLE_HEIGHT));
            let heading = args.psi.unwrap_or(0.0);
            (Trajectory::Hover { position, heading }, position, 10.0)
        }
        ScenarioKind::Circle => (Trajectory::Circle, Vector3::zeros(), 40.0),
        ScenarioKind::File => {
            let path = args.trajectory.as_ref().expect("clap enforces --trajectory");
            let table = read_trajectory_file(path).with_context(|| format!("reading {}", path.display()))?;
            let start = table.sample(f64::NEG_INFINITY).position;
            let end = table.end_time();
            (Trajectory::Table(table), start, end)
        }
    };

    let mut config = ScenarioConfig::new(trajectory, args.duration.unwrap_or(default_duration));
    config.physics_dt = args.physics_dt;
    config.control_dt = args.control_dt;
    config.initial_state = RigidBodyState::at_rest(args.initial_position.unwrap_or(start));
    config.rate_derivative = args.rate_derivative.into();
    config.failure = match args.failure {
        None | Some(FailureMode::Nominal) => None,
        Some(mode) => Some(FailureInjection { mode, time: args.failure_time.unwrap_or(0.0) }),
    };
    config.validate()?;
    Ok(config)
}

/// Runs the scenario, writes the log if asked and prints a summary.
pub fn run(args: &Args, out: &mut dyn Write) -> anyhow::Result<()> {
    let config = build_scenario(args)?;
    let (params, gains) = match &args.params {
        Some(path) => load_params_file(path)?,
        None => default_params(),
    };
    let records = run_scenario(&config, &params, &gains)?;
    if let Some(path) = &args.out {
        write_csv(&records, path).with_context(|| format!("writing {}", path.display()))?;
    }

    let mode = config.failure.map_or(FailureMode::Nominal, |f| f.mode);
    writeln!(out, "scenario {:?}, {} steps, failure {}", args.scenario, records.len(), mode_token(mode))?;
    match summarize(&records) {
        Some(s) => {
            writeln!(out, "final position error   {:.6} m", s.final_position_error)?;
            writeln!(out, "rms error, second half {:.6} m", s.rms_error_second_half)?;
            match s.max_error_after_20s {
                Some(e) => writeln!(out, "max error, t >= 20 s   {e:.6} m")?,
                None => writeln!(out, "max error, t >= 20 s   n/a")?,
            }
            writeln!(out, "max thrust             {:.6} N", s.max_thrust)?;
            writeln!(out, "saturation events      {}", s.saturation_events)?;
        }
        None => writeln!(out, "no control steps")?,
    }
    if let Some(path) = &args.out {
        writeln!(out, "log written to {}", path.display())?;
    }
    Ok(())
}
