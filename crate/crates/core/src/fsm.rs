//! Transition and back-transition state machine.
//!
//! Phases run MC -> T0..T4 -> FW for the transition and FW -> BT0..BT4 ->
//! MC for the back-transition. Forward edges fire on convergence criteria
//! with a dwell time; aborts (pilot command or per-phase timeout) jump to
//! the analogous back-transition phase. Each phase emits a bundle of
//! high-level setpoints for the control cascade, including the torque
//! blending coefficient, which ramps linearly during T2 and BT3 and stays
//! continuous across aborts.

use crate::geom::{horizontal, Vec3};

const DEG: f64 = std::f64::consts::PI / 180.0;

/// Flight phase of the transition machinery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Mc,
    T0,
    T1,
    T2,
    T3,
    T4,
    Fw,
    Bt0,
    Bt1,
    Bt2,
    Bt3,
    Bt4,
}

impl Phase {
    /// Next phase along the nominal forward chain.
    pub fn forward_next(&self) -> Option<Phase> {
        use Phase::*;
        match self {
            Mc => None, // requires a pilot trigger
            T0 => Some(T1),
            T1 => Some(T2),
            T2 => Some(T3),
            T3 => Some(T4),
            T4 => Some(Fw),
            Fw => None, // requires a pilot trigger
            Bt0 => Some(Bt1),
            Bt1 => Some(Bt2),
            Bt2 => Some(Bt3),
            Bt3 => Some(Bt4),
            Bt4 => Some(Mc),
        }
    }

    /// Abort target: the analogous back-transition phase.
    pub fn abort_target(&self) -> Option<Phase> {
        use Phase::*;
        match self {
            T0 | T1 => Some(Bt4),
            T2 => Some(Bt3),
            T3 => Some(Bt2),
            T4 => Some(Bt1),
            _ => None,
        }
    }

    pub fn is_transition(&self) -> bool {
        matches!(self, Phase::T0 | Phase::T1 | Phase::T2 | Phase::T3 | Phase::T4)
    }

    pub fn is_back_transition(&self) -> bool {
        matches!(self, Phase::Bt0 | Phase::Bt1 | Phase::Bt2 | Phase::Bt3 | Phase::Bt4)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Phase::Mc => "MC",
            Phase::T0 => "T0",
            Phase::T1 => "T1",
            Phase::T2 => "T2",
            Phase::T3 => "T3",
            Phase::T4 => "T4",
            Phase::Fw => "FW",
            Phase::Bt0 => "BT0",
            Phase::Bt1 => "BT1",
            Phase::Bt2 => "BT2",
            Phase::Bt3 => "BT3",
            Phase::Bt4 => "BT4",
        }
    }
}

/// Pilot/operator commands delivered to the machine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PilotEvent {
    TriggerTransition,
    TriggerBackTransition,
    Abort,
}

/// Thrust-side constraint emitted by a phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThrustObjective {
    ThrustDir(f64),
    Pitch(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VerticalObjective {
    ClimbRate { v_z_r: f64 },
    AltitudeHold { z_r: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HorizontalObjective {
    PositionHold { r_hor_r: Vec3 },
    VelocityVector { v_hor_r: Vec3, v_hor_r_dot: Vec3 },
    HeadingSpeed { h_r: Vec3, h_r_dot: Vec3, v_r: f64, v_r_dot: f64, airspeed_referenced: bool },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LateralObjective {
    Yaw(f64),
    Balanced,
}

/// High-level setpoint bundle a phase imposes on the control cascade.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSetpoints {
    pub thrust: ThrustObjective,
    pub lambda: f64,
    pub vertical: VerticalObjective,
    pub horizontal: HorizontalObjective,
    pub lateral: LateralObjective,
    /// Whether the setpoint solver should include the aerodynamic terms
    /// (hover-style piloting switches them off).
    pub aero_compensation: bool,
}

/// Transition parameters, thresholds and timeouts.
#[derive(Debug, Clone, PartialEq)]
pub struct FsmConfig {
    pub theta_t0: f64,
    pub theta_t1: f64,
    pub theta_t2: f64,
    pub theta_t3: f64,
    pub v_z_t0: f64,
    pub v_z_t1: f64,
    pub v_z_t2: f64,
    pub v_z_t3: f64,
    /// Horizontal speed target at the end of T0, m/s.
    pub v_hor_t0: f64,
    /// Intermediate airspeed for surface effectiveness, m/s.
    pub v_a_t1: f64,
    /// Cruise airspeed, m/s.
    pub v_a_fw: f64,
    pub v_z_bt0: f64,
    pub theta_bt1: f64,
    pub v_z_bt1: f64,
    pub v_z_bt2: f64,
    pub v_a_bt2: f64,
    pub theta_bt3: f64,
    /// Blending ramp rates, 1/s (up in T2, down in BT3).
    pub lambda_up_rate: f64,
    pub lambda_down_rate: f64,
    /// Horizontal-speed ramp acceleration in T0/BT4, m/s^2.
    pub v_hor_ramp: f64,
    /// Airspeed ramp acceleration in T3/BT2, m/s^2.
    pub v_a_ramp: f64,
    /// Convergence thresholds.
    pub eps_airspeed: f64,
    pub eps_v_z: f64,
    pub eps_heading: f64,
    pub eps_altitude: f64,
    pub eps_hover_speed: f64,
    /// Time a convergence criterion must hold before the edge fires, s.
    pub dwell: f64,
    /// Per-phase timeout for transition phases (abort edge), s.
    pub timeout_transition: f64,
    /// Timeout for back-transition phases (fallback to the next phase), s.
    pub timeout_back_transition: f64,
    /// BT2 decelerates against drag only and is allowed more time.
    pub timeout_bt2: f64,
}

impl Default for FsmConfig {
    fn default() -> Self {
        FsmConfig {
            theta_t0: 0.0,
            theta_t1: 0.0,
            theta_t2: 0.0,
            theta_t3: 3.0 * DEG,
            v_z_t0: -1.0,
            v_z_t1: -1.1,
            v_z_t2: -0.9,
            v_z_t3: 0.0,
            v_hor_t0: 5.0,
            v_a_t1: 9.0,
            v_a_fw: 20.0,
            v_z_bt0: 0.5,
            theta_bt1: 3.0 * DEG,
            v_z_bt1: 0.0,
            v_z_bt2: 0.12,
            v_a_bt2: 10.0,
            theta_bt3: 3.0 * DEG,
            lambda_up_rate: 0.5,
            lambda_down_rate: 1.0,
            v_hor_ramp: 1.0,
            v_a_ramp: 1.5,
            eps_airspeed: 0.5,
            eps_v_z: 0.3,
            eps_heading: 5.0 * DEG,
            eps_altitude: 1.0,
            eps_hover_speed: 0.5,
            dwell: 0.5,
            timeout_transition: 15.0,
            timeout_back_transition: 15.0,
            timeout_bt2: 40.0,
        }
    }
}

impl FsmConfig {
    pub fn timeout_for(&self, phase: Phase) -> Option<f64> {
        if phase.is_transition() {
            Some(self.timeout_transition)
        } else if phase == Phase::Bt2 {
            Some(self.timeout_bt2)
        } else if phase.is_back_transition() {
            Some(self.timeout_back_transition)
        } else {
            None
        }
    }
}

/// Vehicle quantities the machine watches for its convergence criteria.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackedState {
    pub position: Vec3,
    pub velocity: Vec3,
    /// Estimated airspeed, m/s.
    pub airspeed: f64,
    /// Horizontal unit vector of the fuselage axis.
    pub body_heading: Vec3,
}

/// References captured on phase entry.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Captures {
    /// Heading captured when the transition starts (and steerable in FW).
    heading: Vec3,
    heading_rate: Vec3,
    psi: f64,
    hover_position: Vec3,
    z_t4: f64,
    z_bt3: f64,
    z_bt4: f64,
    bt4_entry_speed: f64,
    bt4_direction: Vec3,
}

/// The transition/back-transition automaton.
#[derive(Debug, Clone, PartialEq)]
pub struct Fsm {
    pub config: FsmConfig,
    phase: Phase,
    elapsed: f64,
    dwell_accum: f64,
    lambda: f64,
    lambda_entry: f64,
    captures: Captures,
    aborted: bool,
}

/// Edge taken during a step, for logging.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FsmEdge {
    None,
    Forward(Phase),
    Abort(Phase),
    TimeoutFallback(Phase),
}

impl Fsm {
    pub fn new(config: FsmConfig, initial_position: Vec3, initial_heading: Vec3) -> Self {
        let h = if horizontal(&initial_heading).norm() > 1e-9 {
            horizontal(&initial_heading).normalize()
        } else {
            Vec3::new(1.0, 0.0, 0.0)
        };
        Fsm {
            config,
            phase: Phase::Mc,
            elapsed: 0.0,
            dwell_accum: 0.0,
            lambda: 0.0,
            lambda_entry: 0.0,
            captures: Captures {
                heading: h,
                heading_rate: Vec3::zeros(),
                psi: h.y.atan2(h.x),
                hover_position: initial_position,
                z_t4: initial_position.z,
                z_bt3: initial_position.z,
                z_bt4: initial_position.z,
                bt4_entry_speed: 0.0,
                bt4_direction: h,
            },
            aborted: false,
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn time_in_phase(&self) -> f64 {
        self.elapsed
    }

    /// Whether any abort edge has been taken since construction.
    pub fn has_aborted(&self) -> bool {
        self.aborted
    }

    /// Steers the commanded heading (FW piloting); `rate` is `dh_r/dt`.
    pub fn command_heading(&mut self, heading: Vec3, rate: Vec3) {
        let h = horizontal(&heading);
        if h.norm() > 1e-9 {
            self.captures.heading = h.normalize();
            self.captures.heading_rate = horizontal(&rate);
            self.captures.psi = h.y.atan2(h.x);
        }
    }

    pub fn commanded_heading(&self) -> Vec3 {
        self.captures.heading
    }

    /// Advances the machine by `dt` and returns the setpoints to apply,
    /// together with the edge taken (if any).
    pub fn step(
        &mut self,
        dt: f64,
        tracked: &TrackedState,
        events: &[PilotEvent],
    ) -> (PhaseSetpoints, FsmEdge) {
        self.elapsed += dt;
        self.update_lambda();

        let mut edge = FsmEdge::None;

        // Pilot events take precedence over automatic edges.
        for ev in events {
            match (self.phase, ev) {
                (Phase::Mc, PilotEvent::TriggerTransition) => {
                    edge = FsmEdge::Forward(Phase::T0);
                }
                (Phase::Fw, PilotEvent::TriggerBackTransition) => {
                    edge = FsmEdge::Forward(Phase::Bt0);
                }
                (p, PilotEvent::Abort) if p.abort_target().is_some() => {
                    edge = FsmEdge::Abort(p.abort_target().unwrap());
                }
                _ => {}
            }
        }

        if edge == FsmEdge::None {
            if let Some(limit) = self.config.timeout_for(self.phase) {
                if self.elapsed > limit {
                    edge = if let Some(target) = self.phase.abort_target() {
                        FsmEdge::Abort(target)
                    } else {
                        // Back-transition phases fall forward toward MC.
                        FsmEdge::TimeoutFallback(self.phase.forward_next().unwrap_or(Phase::Mc))
                    };
                }
            }
        }

        if edge == FsmEdge::None {
            if self.forward_criterion_met(tracked) {
                self.dwell_accum += dt;
            } else {
                self.dwell_accum = 0.0;
            }
            let no_dwell = matches!(self.phase, Phase::T2 | Phase::Bt3);
            if let Some(next) = self.phase.forward_next() {
                if self.dwell_accum >= self.config.dwell || (no_dwell && self.forward_criterion_met(tracked)) {
                    edge = FsmEdge::Forward(next);
                }
            }
        }

        match edge {
            FsmEdge::Forward(p) | FsmEdge::TimeoutFallback(p) => self.enter(p, tracked, false),
            FsmEdge::Abort(p) => self.enter(p, tracked, true),
            FsmEdge::None => {}
        }

        (self.setpoints(tracked), edge)
    }

    fn update_lambda(&mut self) {
        let c = &self.config;
        self.lambda = match self.phase {
            Phase::T2 => (self.lambda_entry + c.lambda_up_rate * self.elapsed).min(1.0),
            Phase::Bt3 => (self.lambda_entry - c.lambda_down_rate * self.elapsed).max(0.0),
            Phase::Mc | Phase::T0 | Phase::T1 | Phase::Bt4 => 0.0,
            _ => 1.0,
        };
    }

    fn forward_criterion_met(&self, t: &TrackedState) -> bool {
        let c = &self.config;
        let v_hor = horizontal(&t.velocity).norm();
        let v_z = t.velocity.z;
        match self.phase {
            Phase::Mc | Phase::Fw => false, // pilot-triggered only
            Phase::T0 => (v_hor - c.v_hor_t0).abs() < c.eps_airspeed,
            Phase::T1 => (t.airspeed - c.v_a_t1).abs() < c.eps_airspeed,
            Phase::T2 => self.lambda >= 1.0,
            Phase::T3 => (t.airspeed - c.v_a_fw).abs() < c.eps_airspeed,
            Phase::T4 => {
                (t.position.z - self.captures.z_t4).abs() < c.eps_altitude
                    && (t.airspeed - c.v_a_fw).abs() < c.eps_airspeed
            }
            Phase::Bt0 => (v_z - c.v_z_bt0).abs() < c.eps_v_z,
            Phase::Bt1 => (v_z - c.v_z_bt1).abs() < c.eps_v_z,
            Phase::Bt2 => (t.airspeed - c.v_a_bt2).abs() < c.eps_airspeed,
            Phase::Bt3 => self.lambda <= 0.0,
            Phase::Bt4 => v_hor < c.eps_hover_speed,
        }
    }

    fn enter(&mut self, phase: Phase, tracked: &TrackedState, abort: bool) {
        if abort {
            self.aborted = true;
        }
        // Capture phase-entry references.
        match phase {
            Phase::T0 => {
                let h = if tracked.body_heading.norm() > 1e-9 {
                    horizontal(&tracked.body_heading).normalize()
                } else {
                    self.captures.heading
                };
                self.captures.heading = h;
                self.captures.heading_rate = Vec3::zeros();
                self.captures.psi = h.y.atan2(h.x);
            }
            Phase::T4 => self.captures.z_t4 = tracked.position.z,
            Phase::Bt3 => self.captures.z_bt3 = tracked.position.z,
            Phase::Bt4 => {
                self.captures.z_bt4 = tracked.position.z;
                let v_hor = horizontal(&tracked.velocity);
                self.captures.bt4_entry_speed = v_hor.norm();
                self.captures.bt4_direction = if v_hor.norm() > 1e-3 {
                    v_hor.normalize()
                } else {
                    self.captures.heading
                };
                self.captures.psi =
                    self.captures.bt4_direction.y.atan2(self.captures.bt4_direction.x);
            }
            Phase::Mc => self.captures.hover_position = tracked.position,
            _ => {}
        }
        self.lambda_entry = self.lambda;
        self.phase = phase;
        self.elapsed = 0.0;
        self.dwell_accum = 0.0;
        self.update_lambda();
    }

    /// Setpoint bundle for the current phase at the current phase time.
    pub fn setpoints(&self, tracked: &TrackedState) -> PhaseSetpoints {
        setpoints_for_phase(self.phase, &self.config, &PhaseContext {
            elapsed: self.elapsed,
            lambda: self.lambda,
            heading: self.captures.heading,
            heading_rate: self.captures.heading_rate,
            psi: self.captures.psi,
            hover_position: self.captures.hover_position,
            z_t4: self.captures.z_t4,
            z_bt3: self.captures.z_bt3,
            z_bt4: self.captures.z_bt4,
            bt4_entry_speed: self.captures.bt4_entry_speed,
            bt4_direction: self.captures.bt4_direction,
            _tracked: *tracked,
        })
    }
}

/// Captured references and phase time needed to evaluate a phase's
/// setpoint row.
#[derive(Debug, Clone, Copy)]
pub struct PhaseContext {
    pub elapsed: f64,
    pub lambda: f64,
    pub heading: Vec3,
    pub heading_rate: Vec3,
    pub psi: f64,
    pub hover_position: Vec3,
    pub z_t4: f64,
    pub z_bt3: f64,
    pub z_bt4: f64,
    pub bt4_entry_speed: f64,
    pub bt4_direction: Vec3,
    _tracked: TrackedState,
}

impl PhaseContext {
    pub fn nominal(heading: Vec3, z: f64) -> Self {
        PhaseContext {
            elapsed: 0.0,
            lambda: 0.0,
            heading,
            heading_rate: Vec3::zeros(),
            psi: heading.y.atan2(heading.x),
            hover_position: Vec3::new(0.0, 0.0, z),
            z_t4: z,
            z_bt3: z,
            z_bt4: z,
            bt4_entry_speed: 0.0,
            bt4_direction: heading,
            _tracked: TrackedState {
                position: Vec3::new(0.0, 0.0, z),
                velocity: Vec3::zeros(),
                airspeed: 0.0,
                body_heading: heading,
            },
        }
    }
}

/// Nominal blending coefficient of a phase at the given phase time:
/// `min(0.5 dt, 1)` during T2, `max(1 - dt, 0)` during BT3 (with the
/// default rates), constants elsewhere.
pub fn lambda_schedule(phase: Phase, elapsed: f64, cfg: &FsmConfig) -> f64 {
    debug_assert!(elapsed >= 0.0);
    match phase {
        Phase::T2 => (cfg.lambda_up_rate * elapsed).min(1.0),
        Phase::Bt3 => (1.0 - cfg.lambda_down_rate * elapsed).max(0.0),
        Phase::Mc | Phase::T0 | Phase::T1 | Phase::Bt4 => 0.0,
        _ => 1.0,
    }
}

/// Emits the setpoint row of a phase given its captured references.
pub fn setpoints_for_phase(phase: Phase, c: &FsmConfig, ctx: &PhaseContext) -> PhaseSetpoints {
    let heading_speed = |v_r: f64, v_r_dot: f64| HorizontalObjective::HeadingSpeed {
        h_r: ctx.heading,
        h_r_dot: ctx.heading_rate,
        v_r,
        v_r_dot,
        airspeed_referenced: true,
    };
    match phase {
        Phase::Mc => PhaseSetpoints {
            thrust: ThrustObjective::ThrustDir(-std::f64::consts::FRAC_PI_2),
            lambda: 0.0,
            vertical: VerticalObjective::AltitudeHold { z_r: ctx.hover_position.z },
            horizontal: HorizontalObjective::PositionHold { r_hor_r: horizontal(&ctx.hover_position) },
            lateral: LateralObjective::Yaw(ctx.psi),
            aero_compensation: false,
        },
        Phase::T0 => {
            let (v, v_dot) = ramp(0.0, c.v_hor_t0, c.v_hor_ramp, ctx.elapsed);
            PhaseSetpoints {
                thrust: ThrustObjective::Pitch(c.theta_t0),
                lambda: 0.0,
                vertical: VerticalObjective::ClimbRate { v_z_r: c.v_z_t0 },
                horizontal: HorizontalObjective::VelocityVector {
                    v_hor_r: ctx.heading * v,
                    v_hor_r_dot: ctx.heading * v_dot,
                },
                lateral: LateralObjective::Yaw(ctx.psi),
                aero_compensation: true,
            }
        }
        Phase::T1 => PhaseSetpoints {
            thrust: ThrustObjective::Pitch(c.theta_t1),
            lambda: 0.0,
            vertical: VerticalObjective::ClimbRate { v_z_r: c.v_z_t1 },
            horizontal: heading_speed(c.v_a_t1, 0.0),
            lateral: LateralObjective::Balanced,
            aero_compensation: true,
        },
        Phase::T2 => PhaseSetpoints {
            thrust: ThrustObjective::Pitch(c.theta_t2),
            lambda: ctx.lambda,
            vertical: VerticalObjective::ClimbRate { v_z_r: c.v_z_t2 },
            horizontal: heading_speed(c.v_a_t1, 0.0),
            lateral: LateralObjective::Balanced,
            aero_compensation: true,
        },
        Phase::T3 => {
            let (v, v_dot) = ramp(c.v_a_t1, c.v_a_fw, c.v_a_ramp, ctx.elapsed);
            PhaseSetpoints {
                thrust: ThrustObjective::Pitch(c.theta_t3),
                lambda: 1.0,
                vertical: VerticalObjective::ClimbRate { v_z_r: c.v_z_t3 },
                horizontal: heading_speed(v, v_dot),
                lateral: LateralObjective::Balanced,
                aero_compensation: true,
            }
        }
        Phase::T4 => PhaseSetpoints {
            thrust: ThrustObjective::ThrustDir(0.0),
            lambda: 1.0,
            vertical: VerticalObjective::AltitudeHold { z_r: ctx.z_t4 },
            horizontal: heading_speed(c.v_a_fw, 0.0),
            lateral: LateralObjective::Balanced,
            aero_compensation: true,
        },
        Phase::Fw => PhaseSetpoints {
            thrust: ThrustObjective::ThrustDir(0.0),
            lambda: 1.0,
            vertical: VerticalObjective::AltitudeHold { z_r: ctx.z_t4 },
            horizontal: heading_speed(c.v_a_fw, 0.0),
            lateral: LateralObjective::Balanced,
            aero_compensation: true,
        },
        Phase::Bt0 => PhaseSetpoints {
            thrust: ThrustObjective::ThrustDir(0.0),
            lambda: 1.0,
            vertical: VerticalObjective::ClimbRate { v_z_r: c.v_z_bt0 },
            horizontal: heading_speed(c.v_a_fw, 0.0),
            lateral: LateralObjective::Balanced,
            aero_compensation: true,
        },
        Phase::Bt1 => PhaseSetpoints {
            thrust: ThrustObjective::Pitch(c.theta_bt1),
            lambda: 1.0,
            vertical: VerticalObjective::ClimbRate { v_z_r: c.v_z_bt1 },
            horizontal: heading_speed(c.v_a_fw, 0.0),
            lateral: LateralObjective::Balanced,
            aero_compensation: true,
        },
        Phase::Bt2 => {
            let (v, v_dot) = ramp_down(c.v_a_fw, c.v_a_bt2, c.v_a_ramp, ctx.elapsed);
            PhaseSetpoints {
                thrust: ThrustObjective::Pitch(c.theta_bt1),
                lambda: 1.0,
                vertical: VerticalObjective::ClimbRate { v_z_r: c.v_z_bt2 },
                horizontal: heading_speed(v, v_dot),
                lateral: LateralObjective::Balanced,
                aero_compensation: true,
            }
        }
        Phase::Bt3 => PhaseSetpoints {
            thrust: ThrustObjective::Pitch(c.theta_bt3),
            lambda: ctx.lambda,
            vertical: VerticalObjective::AltitudeHold { z_r: ctx.z_bt3 },
            horizontal: heading_speed(c.v_a_bt2, 0.0),
            lateral: LateralObjective::Balanced,
            aero_compensation: true,
        },
        Phase::Bt4 => {
            let (v, v_dot) = ramp_down(ctx.bt4_entry_speed, 0.0, c.v_hor_ramp, ctx.elapsed);
            PhaseSetpoints {
                thrust: ThrustObjective::ThrustDir(-std::f64::consts::FRAC_PI_2),
                lambda: 0.0,
                vertical: VerticalObjective::AltitudeHold { z_r: ctx.z_bt4 },
                horizontal: HorizontalObjective::VelocityVector {
                    v_hor_r: ctx.bt4_direction * v,
                    v_hor_r_dot: ctx.bt4_direction * (-v_dot),
                },
                lateral: LateralObjective::Yaw(ctx.psi),
                aero_compensation: false,
            }
        }
    }
}

fn ramp(from: f64, to: f64, rate: f64, elapsed: f64) -> (f64, f64) {
    let v = (from + rate * elapsed).min(to);
    let dot = if v < to { rate } else { 0.0 };
    (v, dot)
}

fn ramp_down(from: f64, to: f64, rate: f64, elapsed: f64) -> (f64, f64) {
    let v = (from - rate * elapsed).max(to);
    let dot = if v > to { rate } else { 0.0 };
    (v, dot)
}
