//! Closed-loop scenario runner: binds the plant, actuators, sensors and
//! the flight controller, produces a per-tick log, mission metrics and
//! plot-ready output files. Runs are deterministic for a given scenario
//! and seed.

use crate::controller::{ControlTelemetry, ControllerConfig, FlightController, SensorData};
use crate::fsm::{Phase, PilotEvent};
use crate::geom::{BodyFrame, Vec3, K0};
use crate::plant::{
    actuator_step, plant_step, ActuatorState, Environment, PlantError, PwmCalibration,
    VehicleState,
};
use crate::scenario::{MissionEventKind, Scenario, ScenarioError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("controller setup failed: {0}")]
    Controller(#[from] crate::inner::AllocationError),
    #[error("plant error at t = {t:.3} s: {source}")]
    Plant { t: f64, source: PlantError },
    #[error("simulation diverged at t = {t:.3} s: {reason}")]
    Diverged { t: f64, reason: String },
}

/// One controller-tick snapshot. Column order in the log file follows
/// field order here.
#[derive(Debug, Clone)]
pub struct LogRecord {
    pub t: f64,
    pub position: Vec3,
    pub velocity: Vec3,
    pub airspeed_true: f64,
    pub airspeed_est: f64,
    pub pitch_deg: f64,
    pub heading_deg: f64,
    pub pitch_r_deg: f64,
    pub omega: Vec3,
    pub phase: Phase,
    pub lambda: f64,
    pub accel_r: Vec3,
    pub t_mc_r: f64,
    pub t_fw_r: f64,
    pub pusher_cmd: f64,
    pub rotors: [f64; 4],
    pub rotor_pwm: [u16; 4],
    pub pusher_pwm: u16,
    pub aileron_deg: f64,
    pub ruddervator_l_deg: f64,
    pub ruddervator_r_deg: f64,
    pub i_vz: f64,
    pub i_vh_norm: f64,
    pub i_vt: f64,
    pub i_h_z: f64,
    pub i_omega: Vec3,
    pub z_ref: f64,
    pub v_z_r: f64,
    pub heading_err_deg: f64,
    pub airspeed_r: f64,
    pub rotor_saturated: bool,
    pub surface_saturated: bool,
    pub thrust_clamped: bool,
    pub solver_failed: bool,
}

pub const LOG_HEADER: &str = "t\tpos_n\tpos_e\tpos_d\tvel_n\tvel_e\tvel_d\tairspeed_true\tairspeed_est\tpitch_deg\theading_deg\tpitch_r_deg\tomega_x\tomega_y\tomega_z\tphase\tlambda\taccel_r_n\taccel_r_e\taccel_r_d\tt_mc_r\tt_fw_r\tpusher_cmd\tt1\tt2\tt3\tt4\tpwm1\tpwm2\tpwm3\tpwm4\tpwm_pusher\taileron_deg\truddervator_l_deg\truddervator_r_deg\ti_vz\ti_vh_norm\ti_vt\ti_h_z\ti_omega_x\ti_omega_y\ti_omega_z\tz_ref\tv_z_r\theading_err_deg\tairspeed_r\tflags";

impl LogRecord {
    pub fn to_line(&self) -> String {
        let f = |x: f64| format!("{x:.6}");
        let mut cols: Vec<String> = Vec::with_capacity(48);
        cols.push(f(self.t));
        for v in [&self.position, &self.velocity] {
            cols.extend(v.iter().map(|x| f(*x)));
        }
        cols.push(f(self.airspeed_true));
        cols.push(f(self.airspeed_est));
        cols.push(f(self.pitch_deg));
        cols.push(f(self.heading_deg));
        cols.push(f(self.pitch_r_deg));
        cols.extend(self.omega.iter().map(|x| f(*x)));
        cols.push(self.phase.name().to_string());
        cols.push(f(self.lambda));
        cols.extend(self.accel_r.iter().map(|x| f(*x)));
        cols.push(f(self.t_mc_r));
        cols.push(f(self.t_fw_r));
        cols.push(f(self.pusher_cmd));
        cols.extend(self.rotors.iter().map(|x| f(*x)));
        cols.extend(self.rotor_pwm.iter().map(|x| x.to_string()));
        cols.push(self.pusher_pwm.to_string());
        cols.push(f(self.aileron_deg));
        cols.push(f(self.ruddervator_l_deg));
        cols.push(f(self.ruddervator_r_deg));
        cols.push(f(self.i_vz));
        cols.push(f(self.i_vh_norm));
        cols.push(f(self.i_vt));
        cols.push(f(self.i_h_z));
        cols.extend(self.i_omega.iter().map(|x| f(*x)));
        cols.push(f(self.z_ref));
        cols.push(f(self.v_z_r));
        cols.push(f(self.heading_err_deg));
        cols.push(f(self.airspeed_r));
        let flags = (self.rotor_saturated as u8)
            | ((self.surface_saturated as u8) << 1)
            | ((self.thrust_clamped as u8) << 2)
            | ((self.solver_failed as u8) << 3);
        cols.push(flags.to_string());
        cols.join("\t")
    }
}

/// Contiguous span of one phase in a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseInterval {
    pub phase: Phase,
    pub t_start: f64,
    pub t_end: f64,
}

/// Mission-level result metrics.
#[derive(Debug, Clone, Default)]
pub struct MetricsSummary {
    pub duration: f64,
    /// Whether the mission script actually triggered a transition.
    pub attempted_mission: bool,
    pub phase_sequence: Vec<String>,
    pub completed_full_mission: bool,
    pub aborted: bool,
    /// Max |z - z_ref| during the transition phases T0..T4, m.
    pub transition_alt_dev_max: f64,
    /// RMS of z - z_ref during T0..T4, m.
    pub transition_alt_rms: f64,
    /// Max steady-state heading error over the second half of each of
    /// T1..T4, deg.
    pub transition_heading_err_max_deg: f64,
    /// RMS heading error over T1..T4, deg.
    pub transition_heading_rms_deg: f64,
    /// Max |airspeed - cruise| over the last 30% of the FW phase, m/s.
    pub fw_airspeed_settle_err: f64,
    /// Max pusher command over BT2, N (the deceleration is drag-limited
    /// above the commanded envelope at high airspeed, so the pusher
    /// actively regulates there).
    pub bt2_pusher_cmd_max: f64,
    /// Total time within BT2 with the pusher command clamped at zero
    /// while the airspeed is still above the deceleration target, s. The
    /// reverse-thrust demand appears once drag falls below the commanded
    /// deceleration; the hardware cannot brake, so the command rests at
    /// zero for the final stretch of the deceleration.
    pub bt2_pusher_rest_duration: f64,
    /// Max |v| over the final two seconds, m/s.
    pub final_hover_speed: f64,
    /// Per-phase RMS of the vertical-speed tracking error, m/s.
    pub v_z_rms_by_phase: Vec<(String, f64)>,
    pub rotor_saturation_fraction: f64,
    pub solver_failures: usize,
}

/// Acceptance thresholds for the reference mission.
#[derive(Debug, Clone, Copy)]
pub struct MetricsThresholds {
    pub fw_airspeed_band: f64,
    pub heading_err_max_deg: f64,
    pub alt_dev_max: f64,
    pub final_hover_speed_max: f64,
    /// Minimum at-zero pusher rest time during the BT2 deceleration, s.
    pub bt2_pusher_rest_min: f64,
}

impl Default for MetricsThresholds {
    fn default() -> Self {
        MetricsThresholds {
            fw_airspeed_band: 1.0,
            heading_err_max_deg: 3.0,
            alt_dev_max: 5.0,
            final_hover_speed_max: 0.5,
            bt2_pusher_rest_min: 0.25,
        }
    }
}

impl MetricsSummary {
    pub fn to_kv_lines(&self) -> String {
        let mut s = String::new();
        use std::fmt::Write as _;
        let _ = writeln!(s, "duration = {:.3}", self.duration);
        let _ = writeln!(s, "phase_sequence = {}", self.phase_sequence.join(","));
        let _ = writeln!(s, "completed_full_mission = {}", self.completed_full_mission);
        let _ = writeln!(s, "aborted = {}", self.aborted);
        let _ = writeln!(s, "transition_alt_dev_max = {:.4}", self.transition_alt_dev_max);
        let _ = writeln!(s, "transition_alt_rms = {:.4}", self.transition_alt_rms);
        let _ = writeln!(
            s,
            "transition_heading_err_max_deg = {:.4}",
            self.transition_heading_err_max_deg
        );
        let _ = writeln!(s, "transition_heading_rms_deg = {:.4}", self.transition_heading_rms_deg);
        let _ = writeln!(s, "fw_airspeed_settle_err = {:.4}", self.fw_airspeed_settle_err);
        let _ = writeln!(s, "bt2_pusher_cmd_max = {:.4}", self.bt2_pusher_cmd_max);
        let _ = writeln!(s, "bt2_pusher_rest_duration = {:.4}", self.bt2_pusher_rest_duration);
        let _ = writeln!(s, "final_hover_speed = {:.4}", self.final_hover_speed);
        for (phase, rms) in &self.v_z_rms_by_phase {
            let _ = writeln!(s, "v_z_rms_{phase} = {rms:.4}");
        }
        let _ = writeln!(s, "rotor_saturation_fraction = {:.4}", self.rotor_saturation_fraction);
        let _ = writeln!(s, "solver_failures = {}", self.solver_failures);
        s
    }

    /// Names of acceptance checks the mission failed. Mission-shape checks
    /// apply only when the scenario actually scripted a transition.
    pub fn acceptance_failures(&self, th: &MetricsThresholds) -> Vec<String> {
        let mut fails = Vec::new();
        if !self.attempted_mission {
            return fails;
        }
        if !self.completed_full_mission {
            fails.push("mission_incomplete".to_string());
        }
        if self.aborted {
            fails.push("aborted".to_string());
        }
        if self.fw_airspeed_settle_err > th.fw_airspeed_band {
            fails.push(format!("fw_airspeed_settle_err={:.3}", self.fw_airspeed_settle_err));
        }
        if self.transition_heading_err_max_deg > th.heading_err_max_deg {
            fails.push(format!(
                "transition_heading_err_max_deg={:.3}",
                self.transition_heading_err_max_deg
            ));
        }
        if self.transition_alt_dev_max > th.alt_dev_max {
            fails.push(format!("transition_alt_dev_max={:.3}", self.transition_alt_dev_max));
        }
        if self.final_hover_speed > th.final_hover_speed_max {
            fails.push(format!("final_hover_speed={:.3}", self.final_hover_speed));
        }
        if self.bt2_pusher_rest_duration < th.bt2_pusher_rest_min {
            fails.push(format!(
                "bt2_pusher_rest_duration={:.3}",
                self.bt2_pusher_rest_duration
            ));
        }
        fails
    }
}

#[derive(Debug)]
pub struct SimOutput {
    pub log: Vec<LogRecord>,
    pub metrics: MetricsSummary,
    pub phases: Vec<PhaseInterval>,
}

/// First-order gust model: low-pass filtered white noise added to the
/// steady wind.
struct GustState {
    rng: ChaCha8Rng,
    value: Vec3,
    intensity: f64,
    tau: f64,
}

impl GustState {
    fn new(seed: u64, intensity: f64) -> Self {
        GustState { rng: ChaCha8Rng::seed_from_u64(seed), value: Vec3::zeros(), intensity, tau: 1.0 }
    }

    fn step(&mut self, dt: f64) -> Vec3 {
        if self.intensity <= 0.0 {
            return Vec3::zeros();
        }
        let alpha = dt / self.tau;
        let scale = self.intensity * (2.0 * alpha).sqrt();
        let n = Vec3::new(
            StandardNormal.sample(&mut self.rng),
            StandardNormal.sample(&mut self.rng),
            0.0,
        );
        self.value += -self.value * alpha + scale * n;
        self.value
    }
}

/// Runs a scenario to completion and computes mission metrics.
pub fn run_scenario(scenario: &Scenario) -> Result<SimOutput, SimError> {
    scenario.validate()?;

    let plant = &scenario.plant;
    let heading = scenario.mission.initial_heading;
    let attitude = BodyFrame::IDENTITY.rotated_by(&K0, heading);
    let mut state = VehicleState {
        position: scenario.mission.start_position,
        velocity: Vec3::zeros(),
        attitude,
        angular_rate: Vec3::zeros(),
    };

    // Start with lag states settled on the controller's hover demand so
    // the vehicle does not drop during controller spin-up.
    let hover = crate::plant::hover_command(&scenario.controller_model);
    let mut actuators =
        ActuatorState::settled(hover, scenario.tau_rotor, scenario.tau_surface, scenario.limits);

    let ctl_cfg = ControllerConfig {
        model: scenario.controller_model.clone(),
        outer: scenario.outer.clone(),
        inner: scenario.inner.clone(),
        fsm: scenario.fsm.clone(),
        limits: scenario.limits,
        dt_inner: scenario.dt_ctl,
        outer_divisor: 5,
        airdata_epsilon: 1e-3,
    };

    let mut pitot_rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut gusts = GustState::new(
        scenario.environment.gust_seed.unwrap_or(scenario.seed.wrapping_add(1)),
        scenario.environment.gust_intensity,
    );

    let wind0 = scenario.environment.wind;
    let pitot_true0 = (state.velocity - wind0).dot(&state.attitude.i);
    let mut pitot_filtered = pitot_true0;

    let sensors0 = SensorData::from_state(&state, pitot_filtered);
    let mut ctl = FlightController::new(ctl_cfg, &sensors0)?;

    let cal = PwmCalibration::from_limits(&scenario.limits);
    let n_sub = (scenario.dt_ctl / scenario.dt_plant).round() as usize;
    let n_ticks = (scenario.duration / scenario.dt_ctl).round() as usize;
    let mut log: Vec<LogRecord> = Vec::with_capacity(n_ticks);

    let mut events = scenario.mission.events.clone();
    let mut attempted_mission = false;

    let mut env = Environment {
        wind: wind0,
        gust_seed: scenario.environment.gust_seed,
        gust_intensity: scenario.environment.gust_intensity,
    };

    for tick in 0..n_ticks {
        let t = tick as f64 * scenario.dt_ctl;

        // Fire scripted pilot events whose time has come.
        while let Some(ev) = events.first().copied() {
            if ev.t > t {
                break;
            }
            events.remove(0);
            match ev.kind {
                MissionEventKind::Transition => {
                    attempted_mission = true;
                    ctl.inject(PilotEvent::TriggerTransition);
                }
                MissionEventKind::BackTransition => ctl.inject(PilotEvent::TriggerBackTransition),
                MissionEventKind::Abort => ctl.inject(PilotEvent::Abort),
                MissionEventKind::HeadingRamp { target_psi, rate } => {
                    ctl.set_heading_ramp(target_psi, rate)
                }
            }
        }

        // Sensor path: pitot with noise and conditioning filter.
        let v_a_true = state.velocity - env.wind;
        let pitot_raw = v_a_true.dot(&state.attitude.i)
            + scenario.environment.pitot_noise_sigma
                * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut pitot_rng);
        if scenario.environment.pitot_filter_tau > 0.0 && scenario.environment.pitot_noise_sigma > 0.0 {
            let alpha = 1.0 - (-scenario.dt_ctl / scenario.environment.pitot_filter_tau).exp();
            pitot_filtered += (pitot_raw - pitot_filtered) * alpha;
        } else {
            pitot_filtered = pitot_raw;
        }

        let sensors = SensorData::from_state(&state, pitot_filtered);
        let out = ctl.step(&sensors);

        log.push(make_record(t, &state, &v_a_true, &out.command, &out.telemetry, &cal));

        // Plant substeps with the latest command held.
        for _ in 0..n_sub {
            env.wind = wind0 + gusts.step(scenario.dt_plant);
            actuators = actuator_step(&out.command, &actuators, scenario.dt_plant);
            state = plant_step(&state, &actuators, &env, plant, scenario.dt_plant)
                .map_err(|source| SimError::Plant { t, source })?;
        }

        if !state.is_finite() || state.velocity.norm() > 150.0 || state.position.z.abs() > 2000.0 {
            return Err(SimError::Diverged {
                t,
                reason: format!(
                    "|v| = {:.1}, z = {:.1}, phase {}",
                    state.velocity.norm(),
                    state.position.z,
                    ctl.phase().name()
                ),
            });
        }
    }

    let phases = phase_intervals(&log, scenario.dt_ctl);
    let metrics = compute_metrics(&log, &phases, scenario, attempted_mission, ctl.has_aborted());
    Ok(SimOutput { log, metrics, phases })
}

fn make_record(
    t: f64,
    state: &VehicleState,
    v_a_true: &Vec3,
    cmd: &crate::plant::ActuatorCommand,
    tel: &ControlTelemetry,
    cal: &PwmCalibration,
) -> LogRecord {
    let pwm = crate::plant::pwm_encode(cmd, cal);
    LogRecord {
        t,
        position: state.position,
        velocity: state.velocity,
        airspeed_true: v_a_true.norm(),
        airspeed_est: tel.airspeed_est,
        pitch_deg: state.attitude.pitch().to_degrees(),
        heading_deg: state.attitude.heading().to_degrees(),
        pitch_r_deg: tel.frame_r.pitch().to_degrees(),
        omega: state.angular_rate,
        phase: tel.phase,
        lambda: tel.lambda,
        accel_r: tel.accel_r,
        t_mc_r: tel.t_mc_r,
        t_fw_r: tel.t_fw_r,
        pusher_cmd: tel.pusher_cmd,
        rotors: cmd.rotors,
        rotor_pwm: [pwm[0], pwm[1], pwm[2], pwm[3]],
        pusher_pwm: pwm[4],
        aileron_deg: cmd.aileron.to_degrees(),
        ruddervator_l_deg: cmd.ruddervator_l.to_degrees(),
        ruddervator_r_deg: cmd.ruddervator_r.to_degrees(),
        i_vz: tel.outer_integrators.i_vz,
        i_vh_norm: tel.outer_integrators.i_vh.norm(),
        i_vt: tel.outer_integrators.i_vt,
        i_h_z: tel.outer_integrators.i_h.z,
        i_omega: tel.rate_integrator,
        z_ref: tel.z_ref,
        v_z_r: tel.v_z_r,
        heading_err_deg: tel.heading_err.to_degrees(),
        airspeed_r: tel.airspeed_r,
        rotor_saturated: tel.rotor_saturated,
        surface_saturated: tel.surface_saturated,
        thrust_clamped: tel.thrust_clamped,
        solver_failed: tel.solver_failed,
    }
}

fn phase_intervals(log: &[LogRecord], dt: f64) -> Vec<PhaseInterval> {
    let mut out = Vec::new();
    let mut iter = log.iter();
    let Some(first) = iter.next() else { return out };
    let mut current = PhaseInterval { phase: first.phase, t_start: first.t, t_end: first.t + dt };
    for rec in iter {
        if rec.phase == current.phase {
            current.t_end = rec.t + dt;
        } else {
            out.push(current);
            current = PhaseInterval { phase: rec.phase, t_start: rec.t, t_end: rec.t + dt };
        }
    }
    out.push(current);
    out
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        sum += v * v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

fn compute_metrics(
    log: &[LogRecord],
    phases: &[PhaseInterval],
    scenario: &Scenario,
    attempted_mission: bool,
    aborted: bool,
) -> MetricsSummary {
    let mut m = MetricsSummary {
        duration: scenario.duration,
        attempted_mission,
        aborted,
        ..Default::default()
    };
    if log.is_empty() {
        return m;
    }

    let mut seq: Vec<String> = Vec::new();
    for p in phases {
        if seq.last().map(String::as_str) != Some(p.phase.name()) {
            seq.push(p.phase.name().to_string());
        }
    }
    m.phase_sequence = seq;
    let expected = [
        "MC", "T0", "T1", "T2", "T3", "T4", "FW", "BT0", "BT1", "BT2", "BT3", "BT4", "MC",
    ];
    m.completed_full_mission =
        m.phase_sequence.iter().map(String::as_str).eq(expected.iter().copied()) && !aborted;

    let in_transition =
        |r: &LogRecord| matches!(r.phase, Phase::T0 | Phase::T1 | Phase::T2 | Phase::T3 | Phase::T4);
    m.transition_alt_dev_max = log
        .iter()
        .filter(|r| in_transition(r))
        .map(|r| (r.position.z - r.z_ref).abs())
        .fold(0.0, f64::max);
    m.transition_alt_rms =
        rms(log.iter().filter(|r| in_transition(r)).map(|r| r.position.z - r.z_ref));

    // Steady-state heading error: the worst sample over the second half of
    // each of T1..T4.
    for p in phases {
        if matches!(p.phase, Phase::T1 | Phase::T2 | Phase::T3 | Phase::T4) {
            let mid = 0.5 * (p.t_start + p.t_end);
            let worst = log
                .iter()
                .filter(|r| r.phase == p.phase && r.t >= mid && r.t < p.t_end)
                .map(|r| r.heading_err_deg.abs())
                .fold(0.0, f64::max);
            m.transition_heading_err_max_deg = m.transition_heading_err_max_deg.max(worst);
        }
    }
    m.transition_heading_rms_deg = rms(
        log.iter()
            .filter(|r| matches!(r.phase, Phase::T1 | Phase::T2 | Phase::T3 | Phase::T4))
            .map(|r| r.heading_err_deg),
    );

    // Airspeed settling over the tail of the FW phase.
    if let Some(fw) = phases.iter().find(|p| p.phase == Phase::Fw) {
        let t_from = fw.t_end - 0.3 * (fw.t_end - fw.t_start);
        m.fw_airspeed_settle_err = log
            .iter()
            .filter(|r| r.phase == Phase::Fw && r.t >= t_from)
            .map(|r| (r.airspeed_true - scenario.fsm.v_a_fw).abs())
            .fold(0.0, f64::max);
    }

    // Pusher behavior during the BT2 deceleration: the overall maximum,
    // and the rest-at-zero interval while the airspeed is still above the
    // deceleration target.
    if phases.iter().any(|p| p.phase == Phase::Bt2) {
        let dt = scenario.dt_ctl;
        for r in log.iter().filter(|r| r.phase == Phase::Bt2) {
            m.bt2_pusher_cmd_max = m.bt2_pusher_cmd_max.max(r.pusher_cmd);
            let decelerating = r.airspeed_true > scenario.fsm.v_a_bt2;
            if r.pusher_cmd <= 0.01 && decelerating {
                m.bt2_pusher_rest_duration += dt;
            }
        }
    }

    let t_end = log.last().unwrap().t;
    m.final_hover_speed = log
        .iter()
        .filter(|r| r.t >= t_end - 2.0)
        .map(|r| r.velocity.norm())
        .fold(0.0, f64::max);

    for p in phases {
        if matches!(p.phase, Phase::Mc | Phase::Fw) {
            continue;
        }
        let vals =
            log.iter().filter(|r| r.phase == p.phase).map(|r| r.velocity.z - r.v_z_r);
        m.v_z_rms_by_phase.push((p.phase.name().to_string(), rms(vals)));
    }

    m.rotor_saturation_fraction =
        log.iter().filter(|r| r.rotor_saturated).count() as f64 / log.len() as f64;
    m.solver_failures = log.iter().filter(|r| r.solver_failed).count();
    m
}

/// Writes the time-series log, the metrics summary and six plot-ready
/// slices (airspeed, altitude, pitch, heading, thrust commands,
/// actuators). Returns the created paths.
pub fn emit_outputs(out: &SimOutput, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut created = Vec::new();

    let log_path = dir.join("log.tsv");
    {
        let mut w = std::io::BufWriter::new(std::fs::File::create(&log_path)?);
        writeln!(w, "{LOG_HEADER}")?;
        for rec in &out.log {
            writeln!(w, "{}", rec.to_line())?;
        }
    }
    created.push(log_path);

    let metrics_path = dir.join("metrics.txt");
    std::fs::write(&metrics_path, out.metrics.to_kv_lines())?;
    created.push(metrics_path);

    let figure = |name: &str, header: &str, f: &dyn Fn(&LogRecord) -> String| -> std::io::Result<PathBuf> {
        let path = dir.join(name);
        let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
        writeln!(w, "{header}")?;
        for rec in &out.log {
            writeln!(w, "{}", f(rec))?;
        }
        Ok(path)
    };

    created.push(figure("fig_airspeed.tsv", "t\tairspeed_true\tairspeed_est\tairspeed_r", &|r| {
        format!("{:.6}\t{:.6}\t{:.6}\t{:.6}", r.t, r.airspeed_true, r.airspeed_est, r.airspeed_r)
    })?);
    created.push(figure("fig_altitude.tsv", "t\taltitude\taltitude_ref", &|r| {
        format!("{:.6}\t{:.6}\t{:.6}", r.t, -r.position.z, -r.z_ref)
    })?);
    created.push(figure("fig_pitch.tsv", "t\tpitch_deg\tpitch_r_deg", &|r| {
        format!("{:.6}\t{:.6}\t{:.6}", r.t, r.pitch_deg, r.pitch_r_deg)
    })?);
    created.push(figure("fig_heading.tsv", "t\theading_deg\theading_err_deg", &|r| {
        format!("{:.6}\t{:.6}\t{:.6}", r.t, r.heading_deg, r.heading_err_deg)
    })?);
    created.push(figure("fig_thrust.tsv", "t\tt_mc_r\tpusher_cmd", &|r| {
        format!("{:.6}\t{:.6}\t{:.6}", r.t, r.t_mc_r, r.pusher_cmd)
    })?);
    created.push(figure(
        "fig_actuators.tsv",
        "t\tpwm1\tpwm2\tpwm3\tpwm4\taileron_deg\truddervator_l_deg\truddervator_r_deg",
        &|r| {
            format!(
                "{:.6}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}",
                r.t,
                r.rotor_pwm[0],
                r.rotor_pwm[1],
                r.rotor_pwm[2],
                r.rotor_pwm[3],
                r.aileron_deg,
                r.ruddervator_l_deg,
                r.ruddervator_r_deg
            )
        },
    )?);

    Ok(created)
}

/// Serializes the whole log to one string (for determinism checks).
pub fn log_to_string(log: &[LogRecord]) -> String {
    let mut s = String::with_capacity(log.len() * 256 + LOG_HEADER.len() + 1);
    s.push_str(LOG_HEADER);
    s.push('\n');
    for rec in log {
        s.push_str(&rec.to_line());
        s.push('\n');
    }
    s
}
