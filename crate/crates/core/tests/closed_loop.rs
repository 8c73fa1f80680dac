//! Closed-loop integration checks beyond the acceptance criteria:
//! comparative tracking quality, abort handling mid-transition, and the
//! nominal mission against zero-wind conditions.

use vtol_core::geom::Vec3;
use vtol_core::scenario::{MissionEvent, MissionEventKind, Scenario};
use vtol_core::sim::run_scenario;

/// The zero-wind, matched-model variant tracks strictly better than the
/// mismatched windy reference.
#[test]
fn clean_run_tracks_better_than_mismatched_run() {
    let reference = Scenario::reference_mission();
    let out_ref = run_scenario(&reference).unwrap();

    let mut clean = Scenario::reference_mission();
    clean.plant.mass = clean.controller_model.mass;
    clean.environment.wind = Vec3::zeros();
    let out_clean = run_scenario(&clean).unwrap();

    assert!(out_ref.metrics.completed_full_mission);
    assert!(out_clean.metrics.completed_full_mission);
    assert!(
        out_clean.metrics.transition_alt_rms < out_ref.metrics.transition_alt_rms,
        "altitude RMS: clean {} vs mismatched {}",
        out_clean.metrics.transition_alt_rms,
        out_ref.metrics.transition_alt_rms
    );
    assert!(
        out_clean.metrics.transition_heading_rms_deg < out_ref.metrics.transition_heading_rms_deg,
        "heading RMS: clean {} vs mismatched {}",
        out_clean.metrics.transition_heading_rms_deg,
        out_ref.metrics.transition_heading_rms_deg
    );
}

/// A pilot abort mid-transition routes through the analogous
/// back-transition phase and ends in a stable hover.
#[test]
fn abort_during_t3_returns_to_hover() {
    let mut s = Scenario::reference_mission();
    s.duration = 120.0;
    s.mission.events = vec![
        MissionEvent { t: 10.0, kind: MissionEventKind::Transition },
        // Mid-T3 (the acceleration leg) by the reference timeline.
        MissionEvent { t: 21.0, kind: MissionEventKind::Abort },
    ];
    let out = run_scenario(&s).unwrap();
    let seq = out.metrics.phase_sequence.join(">");
    assert!(out.metrics.aborted, "abort must be recorded: {seq}");
    assert!(
        seq.contains("T3>BT2") || seq.contains("T2>BT3") || seq.contains("T4>BT1"),
        "abort edge missing from {seq}"
    );
    assert!(seq.ends_with("MC"), "mission must end hovering: {seq}");
    let last = out.log.last().unwrap();
    assert!(last.velocity.norm() < 0.5, "final speed {:.3}", last.velocity.norm());
}

/// The mission also works without wind and mismatch (sanity floor for the
/// acceptance thresholds).
#[test]
fn nominal_mission_without_disturbances() {
    let mut s = Scenario::reference_mission();
    s.plant.mass = s.controller_model.mass;
    s.environment.wind = Vec3::zeros();
    s.environment.pitot_noise_sigma = 0.0;
    let out = run_scenario(&s).unwrap();
    let m = &out.metrics;
    assert!(m.completed_full_mission, "{:?}", m.phase_sequence);
    assert!(m.transition_alt_dev_max < 2.0, "alt dev {}", m.transition_alt_dev_max);
    assert!(m.transition_heading_err_max_deg < 1.0, "heading {}", m.transition_heading_err_max_deg);
    assert!(m.fw_airspeed_settle_err < 0.5, "airspeed {}", m.fw_airspeed_settle_err);
    assert!(m.final_hover_speed < 0.2, "hover {}", m.final_hover_speed);
}

/// Rotor-borne phases never command surface torque: with the blending at
/// zero, the surface deflection commands stay at zero.
#[test]
fn lambda_zero_never_commands_surfaces() {
    let out = run_scenario(&Scenario::reference_mission()).unwrap();
    for r in out.log.iter().filter(|r| r.lambda == 0.0) {
        assert!(
            r.aileron_deg.abs() < 1e-12
                && r.ruddervator_l_deg.abs() < 1e-12
                && r.ruddervator_r_deg.abs() < 1e-12,
            "surface command at lambda = 0 (t = {:.2})",
            r.t
        );
    }
}

/// Gusts perturb tracking but the mission still completes.
#[test]
fn mission_completes_with_gusts() {
    let mut s = Scenario::reference_mission();
    s.environment.gust_intensity = 0.5;
    s.environment.gust_seed = Some(42);
    let out = run_scenario(&s).unwrap();
    assert!(out.metrics.completed_full_mission, "{:?}", out.metrics.phase_sequence);
}
