use std::process::{Command, Output};

use biquadcopter_sim::csv_log::{read_csv, HEADER};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_biquadcopter")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn no_arguments_prints_usage() {
    let o = run(&[]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn unknown_flag_and_bad_combinations_fail() {
    assert!(!run(&["circle", "--bogus"]).status.success());
    assert!(!run(&["hover", "--failure-time", "10"]).status.success());
    assert!(!run(&["hover", "--failure", "bottom7"]).status.success());
    assert!(!run(&["file"]).status.success());
    assert!(!run(&["circle", "--physics-dt", "0.003", "--control-dt", "0.001"]).status.success());
}

#[test]
fn hover_run_writes_log_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("hover.csv");
    let o = run(&["hover", "--duration", "1", "--out", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    for key in ["final position error", "max thrust", "saturation events"] {
        assert!(text.contains(key), "{text}");
    }
    let log = std::fs::read_to_string(&path).unwrap();
    assert_eq!(log.lines().next().unwrap(), HEADER.join(","));
    let records = read_csv(&path).unwrap();
    assert_eq!(records.len(), 1000);
    assert!(records.iter().all(|r| r.command.thrust.iter().all(|f| (f - 12.25).abs() < 1e-9)));
}

#[test]
fn failure_run_switches_mode() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("case1.csv");
    let o = run(&[
        "hover", "--duration", "2", "--failure", "bottom4", "--failure-time", "1", "--control-dt", "0.002",
        "--out", path.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let records = read_csv(&path).unwrap();
    assert_eq!(records.len(), 1000);
    assert!(records.iter().all(|r| r.substeps == 2));
    let after: Vec<_> = records.iter().filter(|r| r.t >= 1.0).collect();
    assert_eq!(after.len(), 500);
    assert!(after.iter().all(|r| r.command.thrust[3] == 0.0));
}

#[test]
fn invalid_params_file_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("bad.toml");
    std::fs::write(&params, "[vehicle]\nm = -1.0\n").unwrap();
    let o = run(&["hover", "--duration", "0.01", "--params", params.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("m must be > 0"), "{}", stderr(&o));
}

#[test]
fn file_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let reference = dir.path().join("ref.csv");
    std::fs::write(&reference, "t,x,y,z,psi\n0,0,0,2,0\n0.5,0,0,2,0\n").unwrap();
    let o = run(&["file", "--trajectory", reference.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("500 steps"), "{}", stdout(&o));
}
