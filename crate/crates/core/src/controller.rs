//! The assembled flight controller: air-data estimation, phase machine,
//! outer loops, setpoint inversion, inner loops and allocation, run on a
//! two-rate schedule (fast attitude/rate/allocation ticks, slower outer
//! loops and phase logic).

use crate::airdata::{estimate_air_velocity, AirDataEstimate};
use crate::fsm::{
    Fsm, FsmConfig, FsmEdge, HorizontalObjective, LateralObjective, Phase, PhaseSetpoints,
    PilotEvent, ThrustObjective, TrackedState, VerticalObjective,
};
use crate::geom::{horizontal, wrap_angle, BodyFrame, Vec3, K0};
use crate::inner::{
    allocate_rotors, allocate_surfaces, attitude_ctl, blend_torque, rate_ctl, AllocationConfig,
    AllocationError, InnerGains, RateIntegrator,
};
use crate::outer::{
    altitude_ctl, assemble_acceleration, guidance_tt, horizontal_velocity_ctl,
    speed_heading_ctl, vertical_speed_ctl, OuterGains, OuterIntegrators,
};
use crate::plant::{ActuatorCommand, ActuatorLimits, VehicleParams, VehicleState};
use crate::solver::{
    solve, LateralMode, SolverInput, SolverModel, SolverState, ThrustMode,
};

/// Static controller configuration.
#[derive(Debug, Clone)]
pub struct ControllerConfig {
    /// The vehicle model the control laws believe in (may deliberately
    /// differ from the simulated plant).
    pub model: VehicleParams,
    pub outer: OuterGains,
    pub inner: InnerGains,
    pub fsm: FsmConfig,
    pub limits: ActuatorLimits,
    /// Inner-loop period, s.
    pub dt_inner: f64,
    /// Outer loops and phase logic run every `outer_divisor` inner ticks.
    pub outer_divisor: u32,
    /// Air-data estimator regularizer.
    pub airdata_epsilon: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            model: VehicleParams::default(),
            outer: OuterGains::default(),
            inner: InnerGains::default(),
            fsm: FsmConfig::default(),
            limits: ActuatorLimits::default(),
            dt_inner: 0.004,
            outer_divisor: 5,
            airdata_epsilon: 1e-3,
        }
    }
}

/// State measurements the controller consumes each tick. Position,
/// velocity, attitude and rate come from the navigation solution; the
/// pitot airspeed is the (conditioned) forward air-velocity measurement.
#[derive(Debug, Clone, Copy)]
pub struct SensorData {
    pub position: Vec3,
    pub velocity: Vec3,
    pub attitude: BodyFrame,
    pub angular_rate: Vec3,
    pub pitot_airspeed: f64,
}

impl SensorData {
    /// Perfect-state sensors for a plant state plus a pitot reading.
    pub fn from_state(s: &VehicleState, pitot: f64) -> Self {
        SensorData {
            position: s.position,
            velocity: s.velocity,
            attitude: s.attitude,
            angular_rate: s.angular_rate,
            pitot_airspeed: pitot,
        }
    }
}

/// Everything the controller produced in one tick, for logging and
/// analysis.
#[derive(Debug, Clone, Copy)]
pub struct ControlTelemetry {
    pub phase: Phase,
    pub edge: FsmEdge,
    pub lambda: f64,
    pub accel_r: Vec3,
    pub frame_r: BodyFrame,
    pub thrust_norm_r: f64,
    pub gamma_t_r: f64,
    pub t_mc_r: f64,
    pub t_fw_r: f64,
    /// Pusher command after the non-negativity and envelope clamps.
    pub pusher_cmd: f64,
    pub airspeed_est: f64,
    pub v_a_est: Vec3,
    pub omega_r: Vec3,
    pub torque_r: Vec3,
    pub outer_integrators: OuterIntegrators,
    pub rate_integrator: Vec3,
    pub rotor_saturated: bool,
    pub surface_saturated: bool,
    pub thrust_clamped: bool,
    pub solver_failed: bool,
    /// Commanded altitude profile integrated from the vertical objectives,
    /// for tracking metrics.
    pub z_ref: f64,
    /// Commanded vertical speed after the altitude loop.
    pub v_z_r: f64,
    /// Heading error angle against the commanded heading, rad.
    pub heading_err: f64,
    /// Airspeed setpoint currently tracked (heading modes), m/s.
    pub airspeed_r: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ControlOutput {
    pub command: ActuatorCommand,
    pub telemetry: ControlTelemetry,
}

/// Outputs of the outer tick held constant between outer updates.
#[derive(Debug, Clone, Copy)]
struct OuterHold {
    setpoints: PhaseSetpoints,
    accel_r: Vec3,
    thrust_norm: f64,
    gamma_t_r: f64,
    t_mc_r: f64,
    t_fw_r: f64,
    thrust_clamped: bool,
    solver_failed: bool,
    v_z_r: f64,
    heading_err: f64,
    airspeed_r: f64,
    edge: FsmEdge,
}

#[derive(Debug, Clone, Copy)]
struct HeadingRamp {
    target_psi: f64,
    rate: f64,
}

/// The full cascaded controller with its owned state.
#[derive(Debug, Clone)]
pub struct FlightController {
    pub cfg: ControllerConfig,
    alloc: AllocationConfig,
    fsm: Fsm,
    pub(crate) outer_integrators: OuterIntegrators,
    pub(crate) rate_integrator: RateIntegrator,
    solver_state: SolverState,
    pub(crate) frame_r: BodyFrame,
    frame_r_prev: Option<BodyFrame>,
    omega_r_prev: Option<Vec3>,
    hold: OuterHold,
    tick: u64,
    pending: Vec<PilotEvent>,
    heading_ramp: Option<HeadingRamp>,
    z_ref: f64,
}

impl FlightController {
    pub fn new(cfg: ControllerConfig, initial: &SensorData) -> Result<Self, AllocationError> {
        let alloc = AllocationConfig::from_params(&cfg.model, cfg.limits)?;
        let fsm = Fsm::new(cfg.fsm.clone(), initial.position, initial.attitude.i);
        let hold = OuterHold {
            setpoints: fsm.setpoints(&TrackedState {
                position: initial.position,
                velocity: initial.velocity,
                airspeed: 0.0,
                body_heading: horizontal(&initial.attitude.i),
            }),
            accel_r: Vec3::zeros(),
            thrust_norm: cfg.model.mass * cfg.model.g0,
            gamma_t_r: -std::f64::consts::FRAC_PI_2,
            t_mc_r: cfg.model.mass * cfg.model.g0,
            t_fw_r: 0.0,
            thrust_clamped: false,
            solver_failed: false,
            v_z_r: 0.0,
            heading_err: 0.0,
            airspeed_r: 0.0,
            edge: FsmEdge::None,
        };
        Ok(FlightController {
            alloc,
            fsm,
            outer_integrators: OuterIntegrators::default(),
            rate_integrator: RateIntegrator::default(),
            solver_state: SolverState::new(initial.attitude.j),
            frame_r: initial.attitude,
            frame_r_prev: None,
            omega_r_prev: None,
            hold,
            tick: 0,
            pending: Vec::new(),
            heading_ramp: None,
            z_ref: initial.position.z,
            cfg,
        })
    }

    pub fn phase(&self) -> Phase {
        self.fsm.phase()
    }

    pub fn lambda(&self) -> f64 {
        self.fsm.lambda()
    }

    pub fn has_aborted(&self) -> bool {
        self.fsm.has_aborted()
    }

    pub fn dt_outer(&self) -> f64 {
        self.cfg.dt_inner * self.cfg.outer_divisor as f64
    }

    /// Queues a pilot event for the next outer tick.
    pub fn inject(&mut self, event: PilotEvent) {
        self.pending.push(event);
    }

    /// Commands a heading ramp toward `target_psi` (rad) at `rate` (rad/s),
    /// applied while in the FW phase.
    pub fn set_heading_ramp(&mut self, target_psi: f64, rate: f64) {
        self.heading_ramp = Some(HeadingRamp { target_psi, rate: rate.abs().max(1e-6) });
    }

    /// One inner-loop tick. Outer loops, estimator-driven setpoints and
    /// the phase machine run every `outer_divisor`-th call.
    pub fn step(&mut self, sensors: &SensorData) -> ControlOutput {
        let airdata = estimate_air_velocity(
            &sensors.velocity,
            &sensors.attitude,
            sensors.pitot_airspeed,
            self.cfg.airdata_epsilon,
        );
        if self.tick % self.cfg.outer_divisor as u64 == 0 {
            self.outer_tick(sensors, &airdata);
        } else {
            self.hold.edge = FsmEdge::None;
        }
        self.tick += 1;
        self.inner_tick(sensors, &airdata)
    }

    /// Runs the cascade with externally fixed phase setpoints (no FSM),
    /// used by trim and linearization analyses.
    pub fn step_with_setpoints(
        &mut self,
        sensors: &SensorData,
        setpoints: &PhaseSetpoints,
    ) -> ControlOutput {
        let airdata = estimate_air_velocity(
            &sensors.velocity,
            &sensors.attitude,
            sensors.pitot_airspeed,
            self.cfg.airdata_epsilon,
        );
        if self.tick % self.cfg.outer_divisor as u64 == 0 {
            self.hold.setpoints = *setpoints;
            self.run_outer_loops(sensors, &airdata);
        }
        self.tick += 1;
        self.inner_tick(sensors, &airdata)
    }

    fn outer_tick(&mut self, sensors: &SensorData, airdata: &AirDataEstimate) {
        let dt = self.dt_outer();
        self.apply_heading_ramp(dt);
        let tracked = TrackedState {
            position: sensors.position,
            velocity: sensors.velocity,
            airspeed: airdata.airspeed(),
            body_heading: horizontal(&sensors.attitude.i),
        };
        let events: Vec<PilotEvent> = self.pending.drain(..).collect();
        let (sp, edge) = self.fsm.step(dt, &tracked, &events);
        self.hold.setpoints = sp;
        self.hold.edge = edge;
        self.run_outer_loops(sensors, airdata);
    }

    fn apply_heading_ramp(&mut self, dt: f64) {
        if self.fsm.phase() != Phase::Fw {
            return;
        }
        let Some(ramp) = self.heading_ramp else { return };
        let h = self.fsm.commanded_heading();
        let psi = h.y.atan2(h.x);
        let err = wrap_angle(ramp.target_psi - psi);
        if err.abs() < 1e-6 {
            self.fsm.command_heading(h, Vec3::zeros());
            self.heading_ramp = None;
            return;
        }
        let step = err.clamp(-ramp.rate * dt, ramp.rate * dt);
        let psi_new = psi + step;
        let h_new = Vec3::new(psi_new.cos(), psi_new.sin(), 0.0);
        // dh/dt for the feedforward: psi_dot k0 x h.
        let psi_dot = step / dt;
        let h_dot = psi_dot * K0.cross(&h_new);
        self.fsm.command_heading(h_new, h_dot);
    }

    fn run_outer_loops(&mut self, sensors: &SensorData, airdata: &AirDataEstimate) {
        let dt = self.dt_outer();
        let g = &self.cfg.outer;
        let sp = self.hold.setpoints;
        let v_a_inertial = airdata.to_inertial(&sensors.attitude);

        // Vertical channel.
        let (v_z_r, v_z_r_dot) = match sp.vertical {
            VerticalObjective::ClimbRate { v_z_r } => {
                self.z_ref += v_z_r * dt;
                (v_z_r, 0.0)
            }
            VerticalObjective::AltitudeHold { z_r } => {
                self.z_ref = z_r;
                (altitude_ctl(sensors.position.z, z_r, 0.0, g), 0.0)
            }
        };
        let (a_z_r, i_vz) =
            vertical_speed_ctl(sensors.velocity.z, v_z_r, v_z_r_dot, &self.outer_integrators, g, dt);
        self.outer_integrators.i_vz = i_vz;

        // Horizontal channel.
        let v_hor = horizontal(&sensors.velocity);
        let mut heading_err = 0.0;
        let mut airspeed_r = f64::NAN;
        let a_hor_r = match sp.horizontal {
            HorizontalObjective::PositionHold { r_hor_r } => {
                let v_hor_r =
                    guidance_tt(&horizontal(&sensors.position), &r_hor_r, &Vec3::zeros(), g);
                let (a, i) = horizontal_velocity_ctl(
                    &v_hor,
                    &v_hor_r,
                    &Vec3::zeros(),
                    &self.outer_integrators,
                    g,
                    dt,
                );
                self.outer_integrators.i_vh = i;
                a
            }
            HorizontalObjective::VelocityVector { v_hor_r, v_hor_r_dot } => {
                let (a, i) = horizontal_velocity_ctl(
                    &v_hor,
                    &v_hor_r,
                    &v_hor_r_dot,
                    &self.outer_integrators,
                    g,
                    dt,
                );
                self.outer_integrators.i_vh = i;
                a
            }
            HorizontalObjective::HeadingSpeed { h_r, h_r_dot, v_r, v_r_dot, airspeed_referenced } => {
                airspeed_r = v_r;
                if v_hor.norm() > 1e-9 {
                    heading_err = (v_hor.normalize().cross(&h_r).norm())
                        .atan2(v_hor.normalize().dot(&h_r));
                }
                match speed_heading_ctl(
                    &sensors.velocity,
                    &v_a_inertial,
                    &h_r,
                    &h_r_dot,
                    v_r,
                    v_r_dot,
                    airspeed_referenced,
                    &self.outer_integrators,
                    g,
                    dt,
                ) {
                    Ok(out) => {
                        self.outer_integrators.i_vt = out.i_vt;
                        self.outer_integrators.i_h = out.i_h;
                        out.a_hor_r
                    }
                    Err(_) => {
                        // Heading undefined at very low speed: degrade to
                        // velocity-vector tracking along the commanded
                        // heading.
                        let (a, i) = horizontal_velocity_ctl(
                            &v_hor,
                            &(h_r * v_r),
                            &Vec3::zeros(),
                            &self.outer_integrators,
                            g,
                            dt,
                        );
                        self.outer_integrators.i_vh = i;
                        a
                    }
                }
            }
        };

        let accel_r = assemble_acceleration(a_z_r, &a_hor_r);

        // Attitude/thrust inversion.
        let model_full = SolverModel::from_params(&self.cfg.model);
        let model = if sp.aero_compensation { model_full } else { model_full.without_aero() };
        let thrust = match sp.thrust {
            ThrustObjective::ThrustDir(gt) => ThrustMode::ImposedThrustDir(gt),
            ThrustObjective::Pitch(th) => ThrustMode::ImposedPitch(th),
        };
        let lateral = match sp.lateral {
            LateralObjective::Yaw(psi) => LateralMode::Yaw(psi),
            LateralObjective::Balanced => LateralMode::Balanced,
        };
        let input = SolverInput { accel_r, v_a: v_a_inertial, thrust, lateral };
        match solve(&input, &model, &mut self.solver_state, &sensors.attitude.j) {
            Ok(out) => {
                self.frame_r_prev = Some(self.frame_r);
                self.frame_r = out.frame_r;
                self.hold.thrust_norm = out.thrust_norm;
                self.hold.gamma_t_r = out.gamma_t_r;
                self.hold.t_mc_r = out.t_mc_r;
                self.hold.t_fw_r = out.t_fw_r;
                self.hold.thrust_clamped = out.thrust_clamped;
                self.hold.solver_failed = false;
            }
            Err(_) => {
                // Keep the previous frame and thrust demands for this tick.
                self.frame_r_prev = Some(self.frame_r);
                self.hold.solver_failed = true;
            }
        }
        self.hold.accel_r = accel_r;
        self.hold.v_z_r = v_z_r;
        self.hold.heading_err = heading_err;
        self.hold.airspeed_r = airspeed_r;
    }

    fn inner_tick(&mut self, sensors: &SensorData, airdata: &AirDataEstimate) -> ControlOutput {
        let sp = self.hold.setpoints;
        let v_a_inertial = airdata.to_inertial(&sensors.attitude);

        let omega_r_inertial = attitude_ctl(
            &sensors.attitude,
            &self.frame_r,
            self.frame_r_prev.as_ref(),
            self.dt_outer(),
            &self.cfg.inner,
        );
        let omega_r = sensors.attitude.to_body(&omega_r_inertial);

        let omega_r_dot = if self.cfg.inner.full_torque_law {
            let prev = self.omega_r_prev.unwrap_or(omega_r);
            Some((omega_r - prev) / self.cfg.dt_inner)
        } else {
            None
        };
        self.omega_r_prev = Some(omega_r);

        let (torque_r, rate_integ) = rate_ctl(
            &sensors.angular_rate,
            &omega_r,
            omega_r_dot.as_ref(),
            &self.rate_integrator,
            &self.cfg.model.inertia,
            &self.cfg.inner,
            self.cfg.dt_inner,
        );
        self.rate_integrator = rate_integ;

        let (m_mc, m_fw) = blend_torque(&torque_r, sp.lambda);
        let rotors = allocate_rotors(self.hold.t_mc_r, &m_mc, &self.alloc);
        let surfaces = allocate_surfaces(&m_fw, &v_a_inertial, &self.alloc);

        // The pusher magnitude carries the sign of cos(gamma): demands past
        // +-pi/2 want reverse thrust, which the hardware cannot produce.
        let pusher_signed = self.hold.t_fw_r * self.hold.gamma_t_r.cos().signum();
        let pusher_cmd = pusher_signed.clamp(0.0, self.cfg.limits.pusher_max);

        let command = ActuatorCommand {
            rotors: rotors.thrusts,
            pusher: pusher_cmd,
            aileron: surfaces.aileron,
            ruddervator_l: surfaces.ruddervator_l,
            ruddervator_r: surfaces.ruddervator_r,
        };

        let telemetry = ControlTelemetry {
            phase: self.fsm.phase(),
            edge: self.hold.edge,
            lambda: sp.lambda,
            accel_r: self.hold.accel_r,
            frame_r: self.frame_r,
            thrust_norm_r: self.hold.thrust_norm,
            gamma_t_r: self.hold.gamma_t_r,
            t_mc_r: self.hold.t_mc_r,
            t_fw_r: self.hold.t_fw_r,
            pusher_cmd,
            airspeed_est: airdata.airspeed(),
            v_a_est: v_a_inertial,
            omega_r,
            torque_r,
            outer_integrators: self.outer_integrators,
            rate_integrator: self.rate_integrator.torque,
            rotor_saturated: rotors.saturated,
            surface_saturated: surfaces.saturated,
            thrust_clamped: self.hold.thrust_clamped,
            solver_failed: self.hold.solver_failed,
            z_ref: self.z_ref,
            v_z_r: self.hold.v_z_r,
            heading_err: self.hold.heading_err,
            airspeed_r: self.hold.airspeed_r,
        };
        ControlOutput { command, telemetry }
    }
}
