//! Scenario configuration: plant and controller parameters (allowing
//! deliberate mismatch), gains, environment, mission script and timing,
//! loaded from a sectioned key/value text file.
//!
//! Sections are `[vehicle]` (simulated plant), `[controller]` (the model
//! the control laws use), `[gains]` (control gains and transition
//! parameters), `[environment]` and `[mission]`. Unset keys keep their
//! defaults. Angles use degrees in keys suffixed `_deg`; control-surface
//! derivatives use per-degree values in keys suffixed `_per_deg`.

use crate::fsm::FsmConfig;
use crate::geom::Vec3;
use crate::inner::InnerGains;
use crate::outer::OuterGains;
use crate::plant::{ActuatorLimits, VehicleParams};
use std::path::Path;
use thiserror::Error;

const DEG: f64 = std::f64::consts::PI / 180.0;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

fn parse_err(line: usize, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Parse { line, message: message.into() }
}

/// Ambient conditions and sensor noise for a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvironmentConfig {
    pub wind: Vec3,
    /// Standard deviation of the pitot airspeed noise, m/s.
    pub pitot_noise_sigma: f64,
    /// First-order low-pass time constant applied to the pitot
    /// measurement before the controller sees it (0 disables), s.
    pub pitot_filter_tau: f64,
    pub gust_intensity: f64,
    pub gust_seed: Option<u64>,
}

impl Default for EnvironmentConfig {
    fn default() -> Self {
        EnvironmentConfig {
            wind: Vec3::zeros(),
            pitot_noise_sigma: 0.3,
            pitot_filter_tau: 0.15,
            gust_intensity: 0.0,
            gust_seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MissionEventKind {
    Transition,
    BackTransition,
    Abort,
    /// Ramp the commanded heading to `target_psi` (rad) at `rate` (rad/s).
    HeadingRamp { target_psi: f64, rate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MissionEvent {
    pub t: f64,
    pub kind: MissionEventKind,
}

/// Timed pilot script and initial condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Mission {
    pub events: Vec<MissionEvent>,
    /// Initial NED position (hover start), m.
    pub start_position: Vec3,
    /// Initial heading, rad.
    pub initial_heading: f64,
}

impl Default for Mission {
    fn default() -> Self {
        Mission {
            events: Vec::new(),
            start_position: Vec3::new(0.0, 0.0, -30.0),
            initial_heading: 0.0,
        }
    }
}

/// A complete closed-loop run description.
#[derive(Debug, Clone)]
pub struct Scenario {
    /// Simulated plant truth.
    pub plant: VehicleParams,
    /// The model the controller believes in.
    pub controller_model: VehicleParams,
    pub outer: OuterGains,
    pub inner: InnerGains,
    pub fsm: FsmConfig,
    pub limits: ActuatorLimits,
    pub tau_rotor: f64,
    pub tau_surface: f64,
    pub environment: EnvironmentConfig,
    pub mission: Mission,
    pub dt_plant: f64,
    pub dt_ctl: f64,
    pub duration: f64,
    pub seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            plant: VehicleParams::default(),
            controller_model: VehicleParams::default(),
            outer: OuterGains::default(),
            inner: InnerGains::default(),
            fsm: FsmConfig::default(),
            limits: ActuatorLimits::default(),
            tau_rotor: 0.04,
            tau_surface: 0.03,
            environment: EnvironmentConfig::default(),
            mission: Mission::default(),
            dt_plant: 0.001,
            dt_ctl: 0.004,
            duration: 200.0,
            seed: 1,
        }
    }
}

impl Scenario {
    /// The reference mission: hover, autonomous transition into cruise
    /// against a 3 m/s front wind with 1 m/s lateral component, a 180
    /// degree cruise turn (making the wind a tailwind), back-transition
    /// and final hover. The plant is 1.5 kg heavier than the controller's
    /// model.
    pub fn reference_mission() -> Self {
        let mut s = Scenario::default();
        s.plant.mass = 19.0;
        s.environment.wind = Vec3::new(-3.0, 1.0, 0.0);
        s.mission.events = vec![
            MissionEvent { t: 10.0, kind: MissionEventKind::Transition },
            MissionEvent {
                t: 70.0,
                kind: MissionEventKind::HeadingRamp {
                    target_psi: 180.0 * DEG,
                    rate: 12.0 * DEG,
                },
            },
            MissionEvent { t: 100.0, kind: MissionEventKind::BackTransition },
        ];
        s.duration = 200.0;
        s
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut problems: Vec<String> = Vec::new();
        if let Err(e) = self.plant.validate() {
            problems.push(format!("[vehicle] {e}"));
        }
        if let Err(e) = self.controller_model.validate() {
            problems.push(format!("[controller] {e}"));
        }
        if let Err(e) = self.outer.validate() {
            problems.push(format!("[gains] {e}"));
        }
        if let Err(e) = self.inner.validate() {
            problems.push(format!("[gains] {e}"));
        }
        if !(self.dt_plant > 0.0 && self.dt_plant <= 0.02) {
            problems.push("dt_plant must be in (0, 0.02]".into());
        }
        let ratio = self.dt_ctl / self.dt_plant;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio < 1.0 - 1e-9 {
            problems.push("dt_ctl must be a positive multiple of dt_plant".into());
        }
        if !(self.duration > 0.0) {
            problems.push("duration must be positive".into());
        }
        if !(self.tau_rotor > 0.0 && self.tau_surface > 0.0) {
            problems.push("actuator time constants must be positive".into());
        }
        if self.environment.pitot_noise_sigma < 0.0 || self.environment.pitot_filter_tau < 0.0 {
            problems.push("pitot noise and filter constants must be non-negative".into());
        }
        let mut last_t = -f64::INFINITY;
        for ev in &self.mission.events {
            if ev.t < 0.0 {
                problems.push(format!("mission event at negative time {}", ev.t));
            }
            if ev.t < last_t {
                problems.push("mission events must be sorted by time".into());
            }
            last_t = ev.t;
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::Invalid(problems.join("; ")))
        }
    }

    /// Applies a `section.key=value` override (CLI `--override`).
    pub fn apply_override(&mut self, spec: &str) -> Result<(), ScenarioError> {
        let (path, value) = spec
            .split_once('=')
            .ok_or_else(|| parse_err(0, format!("override '{spec}' is not key=value")))?;
        let (section, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| parse_err(0, format!("override key '{path}' is not section.key")))?;
        self.set_key(section.trim(), key.trim(), value.trim(), 0)
    }

    fn set_key(
        &mut self,
        section: &str,
        key: &str,
        value: &str,
        line: usize,
    ) -> Result<(), ScenarioError> {
        let num = || -> Result<f64, ScenarioError> {
            value
                .parse::<f64>()
                .map_err(|_| parse_err(line, format!("'{value}' is not a number for key '{key}'")))
        };
        let boolean = || -> Result<bool, ScenarioError> {
            match value {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(parse_err(line, format!("'{value}' is not a boolean for key '{key}'"))),
            }
        };
        match section {
            "vehicle" => set_vehicle_key(&mut self.plant, key, value, line)?,
            "controller" => set_vehicle_key(&mut self.controller_model, key, value, line)?,
            "gains" => {
                if !set_gain_key(&mut self.outer, &mut self.inner, &mut self.fsm, key, value, line)? {
                    return Err(parse_err(line, format!("unknown [gains] key '{key}'")));
                }
            }
            "environment" => match key {
                "wind_n" => self.environment.wind.x = num()?,
                "wind_e" => self.environment.wind.y = num()?,
                "wind_d" => self.environment.wind.z = num()?,
                "pitot_noise_sigma" => self.environment.pitot_noise_sigma = num()?,
                "pitot_filter_tau" => self.environment.pitot_filter_tau = num()?,
                "gust_intensity" => self.environment.gust_intensity = num()?,
                "gust_seed" => {
                    self.environment.gust_seed = Some(value.parse::<u64>().map_err(|_| {
                        parse_err(line, format!("'{value}' is not an integer seed"))
                    })?)
                }
                _ => return Err(parse_err(line, format!("unknown [environment] key '{key}'"))),
            },
            "mission" => match key {
                "duration" => self.duration = num()?,
                "dt_plant" => self.dt_plant = num()?,
                "dt_ctl" => self.dt_ctl = num()?,
                "seed" => {
                    self.seed = value
                        .parse::<u64>()
                        .map_err(|_| parse_err(line, format!("'{value}' is not an integer seed")))?
                }
                "start_north" => self.mission.start_position.x = num()?,
                "start_east" => self.mission.start_position.y = num()?,
                "start_altitude" => self.mission.start_position.z = -num()?,
                "initial_heading_deg" => self.mission.initial_heading = num()? * DEG,
                "tau_rotor" => self.tau_rotor = num()?,
                "tau_surface" => self.tau_surface = num()?,
                "rotor_max" => self.limits.rotor_max = num()?,
                "pusher_max" => self.limits.pusher_max = num()?,
                "surface_max_deg" => self.limits.surface_max = num()? * DEG,
                "feedforward" => self.inner.feedforward = boolean()?,
                "full_torque_law" => self.inner.full_torque_law = boolean()?,
                "event" => {
                    let ev = parse_event(value, line)?;
                    self.mission.events.push(ev);
                }
                _ => return Err(parse_err(line, format!("unknown [mission] key '{key}'"))),
            },
            _ => return Err(parse_err(line, format!("unknown section '[{section}]'"))),
        }
        Ok(())
    }
}

fn parse_event(value: &str, line: usize) -> Result<MissionEvent, ScenarioError> {
    let mut parts = value.split_whitespace();
    let t: f64 = parts
        .next()
        .ok_or_else(|| parse_err(line, "event needs a time"))?
        .parse()
        .map_err(|_| parse_err(line, "event time is not a number"))?;
    let kind = match parts.next() {
        Some("transition") => MissionEventKind::Transition,
        Some("back-transition") => MissionEventKind::BackTransition,
        Some("abort") => MissionEventKind::Abort,
        Some("heading") => {
            let target: f64 = parts
                .next()
                .ok_or_else(|| parse_err(line, "heading event needs a target angle (deg)"))?
                .parse()
                .map_err(|_| parse_err(line, "heading target is not a number"))?;
            let rate: f64 = parts.next().unwrap_or("10").parse().map_err(|_| {
                parse_err(line, "heading rate is not a number")
            })?;
            MissionEventKind::HeadingRamp { target_psi: target * DEG, rate: rate * DEG }
        }
        other => {
            return Err(parse_err(line, format!("unknown event kind {other:?}")));
        }
    };
    Ok(MissionEvent { t, kind })
}

fn set_vehicle_key(
    p: &mut VehicleParams,
    key: &str,
    value: &str,
    line: usize,
) -> Result<(), ScenarioError> {
    let v: f64 = value
        .parse()
        .map_err(|_| parse_err(line, format!("'{value}' is not a number for key '{key}'")))?;
    match key {
        "mass" => p.mass = v,
        "jx" => p.inertia.m11 = v,
        "jy" => p.inertia.m22 = v,
        "jz" => p.inertia.m33 = v,
        "g0" => p.g0 = v,
        "rho" => p.rho = v,
        "s_ref" => p.s_ref = v,
        "span" => p.span = v,
        "chord" => p.chord = v,
        "c0" => p.c0 = v,
        "cz0" => p.cz0 = v,
        "cy0" => p.cy0 = v,
        "alpha0_deg" => p.alpha0 = v * DEG,
        "arm_d" => p.arm_d = v,
        "arm_e" => p.arm_e = v,
        "arm_f" => p.arm_f = v,
        "eta" => p.eta = v,
        "cl_da_per_deg" => p.cl_da = v / DEG,
        "cl_drel_per_deg" => p.cl_drel = v / DEG,
        "cl_drer_per_deg" => p.cl_drer = v / DEG,
        "cm_da_per_deg" => p.cm_da = v / DEG,
        "cm_drel_per_deg" => p.cm_drel = v / DEG,
        "cm_drer_per_deg" => p.cm_drer = v / DEG,
        "cn_da_per_deg" => p.cn_da = v / DEG,
        "cn_drel_per_deg" => p.cn_drel = v / DEG,
        "cn_drer_per_deg" => p.cn_drer = v / DEG,
        "cm_alpha" => p.cm_alpha = v,
        "pitch_trim_aoa_deg" => p.pitch_trim_aoa = v * DEG,
        "cn_beta" => p.cn_beta = v,
        "cl_beta" => p.cl_beta = v,
        "damp_roll" => p.damp_roll = v,
        "damp_pitch" => p.damp_pitch = v,
        "damp_yaw" => p.damp_yaw = v,
        _ => return Err(parse_err(line, format!("unknown vehicle key '{key}'"))),
    }
    Ok(())
}

fn set_gain_key(
    outer: &mut OuterGains,
    inner: &mut InnerGains,
    fsm: &mut FsmConfig,
    key: &str,
    value: &str,
    line: usize,
) -> Result<bool, ScenarioError> {
    let v: f64 = value
        .parse()
        .map_err(|_| parse_err(line, format!("'{value}' is not a number for key '{key}'")))?;
    let handled = true;
    match key {
        // Outer loops.
        "k_z" => outer.k_z = v,
        "v_z_min" => outer.v_z_min = v,
        "v_z_max" => outer.v_z_max = v,
        "k_p" => outer.k_p = v,
        "v_h_max" => outer.v_h_max = v,
        "k_vz" => outer.k_vz = v,
        "k_i_vz" => outer.k_i_vz = v,
        "delta_i_vz" => outer.delta_i_vz = v,
        "a_z_min" => outer.a_z_min = v,
        "a_z_max" => outer.a_z_max = v,
        "k_vh" => outer.k_vh = v,
        "k_i_vh" => outer.k_i_vh = v,
        "delta_i_vh" => outer.delta_i_vh = v,
        "a_h_max" => outer.a_h_max = v,
        "k_t" => outer.k_t = v,
        "k_i_t" => outer.k_i_t = v,
        "delta_i_vt" => outer.delta_i_vt = v,
        "a_t_min" => outer.a_t_min = v,
        "a_t_max" => outer.a_t_max = v,
        "k_h" => outer.k_h = v,
        "k_i_h" => outer.k_i_h = v,
        "delta_i_h" => outer.delta_i_h = v,
        "a_l_max" => outer.a_l_max = v,
        "heading_min_speed" => outer.heading_min_speed = v,
        // Inner loops.
        "k_att_i" => inner.k_i_axis = v,
        "k_att_j" => inner.k_j_axis = v,
        "k_att_k" => inner.k_k_axis = v,
        "k_p_omega1" => inner.k_p_omega.x = v,
        "k_p_omega2" => inner.k_p_omega.y = v,
        "k_p_omega3" => inner.k_p_omega.z = v,
        "k_i_omega1" => inner.k_i_omega.x = v,
        "k_i_omega2" => inner.k_i_omega.y = v,
        "k_i_omega3" => inner.k_i_omega.z = v,
        "delta_i_omega1" => inner.delta_i_omega.x = v,
        "delta_i_omega2" => inner.delta_i_omega.y = v,
        "delta_i_omega3" => inner.delta_i_omega.z = v,
        // Transition parameters.
        "theta_t0_deg" => fsm.theta_t0 = v * DEG,
        "theta_t1_deg" => fsm.theta_t1 = v * DEG,
        "theta_t2_deg" => fsm.theta_t2 = v * DEG,
        "theta_t3_deg" => fsm.theta_t3 = v * DEG,
        "v_z_t0" => fsm.v_z_t0 = v,
        "v_z_t1" => fsm.v_z_t1 = v,
        "v_z_t2" => fsm.v_z_t2 = v,
        "v_z_t3" => fsm.v_z_t3 = v,
        "v_hor_t0" => fsm.v_hor_t0 = v,
        "v_a_t1" => fsm.v_a_t1 = v,
        "v_a_fw" => fsm.v_a_fw = v,
        "v_z_bt0" => fsm.v_z_bt0 = v,
        "theta_bt1_deg" => fsm.theta_bt1 = v * DEG,
        "v_z_bt1" => fsm.v_z_bt1 = v,
        "v_z_bt2" => fsm.v_z_bt2 = v,
        "v_a_bt2" => fsm.v_a_bt2 = v,
        "theta_bt3_deg" => fsm.theta_bt3 = v * DEG,
        "lambda_up_rate" => fsm.lambda_up_rate = v,
        "lambda_down_rate" => fsm.lambda_down_rate = v,
        "v_hor_ramp" => fsm.v_hor_ramp = v,
        "v_a_ramp" => fsm.v_a_ramp = v,
        "eps_airspeed" => fsm.eps_airspeed = v,
        "eps_v_z" => fsm.eps_v_z = v,
        "eps_heading_deg" => fsm.eps_heading = v * DEG,
        "eps_altitude" => fsm.eps_altitude = v,
        "eps_hover_speed" => fsm.eps_hover_speed = v,
        "dwell" => fsm.dwell = v,
        "timeout_transition" => fsm.timeout_transition = v,
        "timeout_back_transition" => fsm.timeout_back_transition = v,
        "timeout_bt2" => fsm.timeout_bt2 = v,
        _ => return Ok(false),
    }
    Ok(handled)
}

/// Parses scenario text. Unknown keys and malformed lines are reported
/// with their line number.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut scenario = Scenario::default();
    let mut section: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| parse_err(line_no, "unterminated section header"))?;
            section = Some(name.trim().to_string());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(line_no, format!("expected key = value, got '{line}'")))?;
        let section = section
            .as_deref()
            .ok_or_else(|| parse_err(line_no, "key outside of any [section]"))?;
        scenario.set_key(section, key.trim(), value.trim(), line_no)?;
    }
    scenario.mission.events.sort_by(|a, b| a.t.total_cmp(&b.t));
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    parse_scenario(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let s = parse_scenario("").unwrap();
        assert_eq!(s.controller_model.mass, 17.5);
        assert_eq!(s.outer.k_z, 0.25);
        assert_eq!(s.outer.a_l_max, 5.21);
        assert_eq!(s.inner.k_p_omega, Vec3::new(11.0, 12.0, 4.75));
        assert_eq!(s.fsm.v_a_fw, 20.0);
        assert_eq!(s.dt_plant, 0.001);
        assert_eq!(s.dt_ctl, 0.004);
    }

    #[test]
    fn plant_mass_override_keeps_controller_model() {
        let s = parse_scenario("[vehicle]\nmass = 19\n").unwrap();
        assert_eq!(s.plant.mass, 19.0);
        assert_eq!(s.controller_model.mass, 17.5);
    }

    #[test]
    fn full_file_round_trip() {
        let text = "\
# reference run
[vehicle]
mass = 19.0

[controller]
mass = 17.5

[gains]
k_z = 0.3
theta_t3_deg = 3.0

[environment]
wind_n = -3.0
wind_e = 1.0
pitot_noise_sigma = 0.25

[mission]
duration = 150
seed = 7
start_altitude = 40
event = 10 transition
event = 90 back-transition
event = 45 heading 180 12
";
        let s = parse_scenario(text).unwrap();
        assert_eq!(s.plant.mass, 19.0);
        assert_eq!(s.outer.k_z, 0.3);
        assert_eq!(s.environment.wind, Vec3::new(-3.0, 1.0, 0.0));
        assert_eq!(s.duration, 150.0);
        assert_eq!(s.seed, 7);
        assert_eq!(s.mission.start_position.z, -40.0);
        assert_eq!(s.mission.events.len(), 3);
        // Sorted by time.
        assert_eq!(s.mission.events[1].t, 45.0);
        assert!(matches!(
            s.mission.events[1].kind,
            MissionEventKind::HeadingRamp { .. }
        ));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "[gains]\nk_z = not_a_number\n";
        match parse_scenario(text) {
            Err(ScenarioError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        let text = "[nowhere]\nx = 1\n";
        assert!(matches!(parse_scenario(text), Err(ScenarioError::Parse { line: 2, .. })));
        let text = "orphan = 1\n";
        assert!(matches!(parse_scenario(text), Err(ScenarioError::Parse { line: 1, .. })));
    }

    #[test]
    fn dt_ratio_must_be_integral() {
        let text = "[mission]\ndt_plant = 0.001\ndt_ctl = 0.0025\n";
        assert!(matches!(parse_scenario(text), Err(ScenarioError::Invalid(_))));
    }

    #[test]
    fn overrides_apply() {
        let mut s = Scenario::default();
        s.apply_override("vehicle.mass=19").unwrap();
        s.apply_override("mission.seed=9").unwrap();
        s.apply_override("gains.k_vz = 4.0").unwrap();
        assert_eq!(s.plant.mass, 19.0);
        assert_eq!(s.seed, 9);
        assert_eq!(s.outer.k_vz, 4.0);
        assert!(s.apply_override("nonsense").is_err());
        assert!(s.apply_override("gains.zzz=1").is_err());
    }

    #[test]
    fn reference_mission_is_valid() {
        let s = Scenario::reference_mission();
        s.validate().unwrap();
        assert_eq!(s.plant.mass, 19.0);
        assert_eq!(s.controller_model.mass, 17.5);
        assert_eq!(s.environment.wind, Vec3::new(-3.0, 1.0, 0.0));
    }
}
