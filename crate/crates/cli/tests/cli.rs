//! End-to-end checks of the `vtolsim` binary: exit codes, output files
//! and determinism of the emitted artifacts.

use std::path::Path;
use std::process::Command;

fn vtolsim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vtolsim"))
}

fn write_scenario(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn selftest_passes() {
    let out = vtolsim().arg("selftest").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().all(|l| l.is_empty() || l.starts_with("PASS")), "{text}");
}

#[test]
fn run_writes_outputs_and_reports_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(
        dir.path(),
        "hover.cfg",
        "[mission]\nduration = 3\nseed = 2\nstart_altitude = 20\n",
    );
    let out_dir = dir.path().join("out");
    let out = vtolsim()
        .args(["run", "--scenario"])
        .arg(&scenario)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in [
        "log.tsv",
        "metrics.txt",
        "fig_airspeed.tsv",
        "fig_altitude.tsv",
        "fig_pitch.tsv",
        "fig_heading.tsv",
        "fig_thrust.tsv",
        "fig_actuators.tsv",
    ] {
        assert!(out_dir.join(f).exists(), "missing {f}");
    }
    let metrics = std::fs::read_to_string(out_dir.join("metrics.txt")).unwrap();
    assert!(metrics.contains("completed_full_mission = false"));

    // Same seed reruns byte-identically.
    let out_dir2 = dir.path().join("out2");
    let st = vtolsim()
        .args(["run", "--scenario"])
        .arg(&scenario)
        .arg("--out")
        .arg(&out_dir2)
        .status()
        .unwrap();
    assert!(st.success());
    assert_eq!(
        std::fs::read(out_dir.join("log.tsv")).unwrap(),
        std::fs::read(out_dir2.join("log.tsv")).unwrap()
    );
}

#[test]
fn run_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // Missing scenario file: error.
    let st = vtolsim()
        .args(["run", "--scenario", "/nonexistent.cfg", "--out"])
        .arg(dir.path().join("x"))
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(1));

    // A transition scripted too late to finish: acceptance-metric failure.
    let scenario = write_scenario(
        dir.path(),
        "late.cfg",
        "[mission]\nduration = 12\nseed = 1\nevent = 6 transition\n",
    );
    let st = vtolsim()
        .args(["run", "--scenario"])
        .arg(&scenario)
        .arg("--out")
        .arg(dir.path().join("late"))
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));

    // Bad override: error.
    let st = vtolsim()
        .args(["run", "--scenario"])
        .arg(&scenario)
        .arg("--out")
        .arg(dir.path().join("bad"))
        .args(["--override", "gains.not_a_key=1"])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(1));
}

#[test]
fn linearize_sweep_runs() {
    let out = vtolsim().args(["linearize", "--airspeed-sweep", "0:20:20"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("max_dyn_re"));
    assert_eq!(text.lines().count(), 3, "{text}"); // header + two airspeeds
}
