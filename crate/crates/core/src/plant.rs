//! 6-DOF rigid-body plant for the compound VTOL: bounded aerodynamic
//! force model, lift-rotor/pusher thrust, passive aerodynamic torque,
//! first-order actuator lags and PWM channel mapping.
//!
//! The plant carries its own `VehicleParams` so a scenario can introduce
//! deliberate mismatch against the controller's copy (e.g. a heavier
//! simulated vehicle than the mass the control laws assume).

use crate::geom::{skew, BodyFrame, Vec3, K0};
use nalgebra::{Matrix3, Matrix4, Vector4};
use thiserror::Error;

const DEG: f64 = std::f64::consts::PI / 180.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("plant state became non-finite")]
    NonFiniteState,
    #[error("invalid vehicle parameters: {0}")]
    InvalidParams(String),
    #[error("negative thrust command: {0}")]
    NegativeThrust(f64),
    #[error("PWM value {0} outside [1000, 2000] us")]
    PwmOutOfRange(u16),
}

/// Physical constants of the airframe and its actuators.
///
/// Aerodynamic force coefficients follow the bounded model
/// `F_a = -1/2 rho S |v_a| (c0 (v_a.i2) i2 + cy0 (v_a.j) j + cz0 (v_a.k2) k2)`
/// with `i2`/`k2` the zero-lift axes. Control-surface derivatives are
/// stored per radian. The passive torque coefficients (stability
/// derivatives and rate damping) only shape the simulated plant; the
/// control laws never read them.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleParams {
    pub mass: f64,
    /// Body inertia matrix, kg m^2 (diagonal for this airframe).
    pub inertia: Matrix3<f64>,
    pub g0: f64,
    pub rho: f64,
    /// Reference wing area, m^2.
    pub s_ref: f64,
    /// Lateral reference length (span), m.
    pub span: f64,
    /// Longitudinal reference length (chord), m.
    pub chord: f64,
    /// Axial aerodynamic coefficient (drag-like, along the zero-lift line).
    pub c0: f64,
    /// Normal aerodynamic coefficient (lift-like, along k2).
    pub cz0: f64,
    /// Side-force coefficient (along j).
    pub cy0: f64,
    /// Angle from the fuselage axis to the zero-lift line, rad.
    pub alpha0: f64,
    /// Rotor lateral arm, m.
    pub arm_d: f64,
    /// Rotor longitudinal arm, m.
    pub arm_e: f64,
    /// Longitudinal offset of the rotor quad centre from the CoM, m.
    pub arm_f: f64,
    /// Rotor torque/thrust ratio near hover, m.
    pub eta: f64,
    /// Control-surface derivatives, per rad.
    pub cl_da: f64,
    pub cl_drel: f64,
    pub cl_drer: f64,
    pub cm_da: f64,
    pub cm_drel: f64,
    pub cm_drer: f64,
    pub cn_da: f64,
    pub cn_drel: f64,
    pub cn_drer: f64,
    /// Static pitch-stiffness derivative (per rad of airflow angle from
    /// the zero-lift line), negative for a statically stable airframe.
    pub cm_alpha: f64,
    /// Airflow angle from the zero-lift line at which the static pitch
    /// moment vanishes, rad.
    pub pitch_trim_aoa: f64,
    /// Weathervane yaw-stiffness derivative per rad of sideslip, positive.
    pub cn_beta: f64,
    /// Dihedral roll derivative per rad of sideslip, negative.
    pub cl_beta: f64,
    /// Rotational damping coefficients (dimensionless, applied with the
    /// span/chord squared and `1/2 rho S |v_a|`).
    pub damp_roll: f64,
    pub damp_pitch: f64,
    pub damp_yaw: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams {
            mass: 17.5,
            inertia: Matrix3::from_diagonal(&Vec3::new(0.87, 1.11, 1.84)),
            g0: 9.81,
            rho: 1.2,
            s_ref: 0.868,
            span: 3.2,
            chord: 0.3,
            c0: 0.074,
            cz0: 5.074,
            cy0: 0.5,
            alpha0: 4.53 * DEG,
            arm_d: 0.55,
            arm_e: 0.55,
            arm_f: 0.025,
            eta: 0.021,
            // Surface derivatives are tabulated per degree; stored per rad.
            cl_da: 0.002 / DEG,
            cl_drel: 0.0,
            cl_drer: 0.0,
            cm_da: 0.0,
            cm_drel: 0.006 / DEG,
            cm_drer: 0.006 / DEG,
            cn_da: 0.0,
            cn_drel: -0.0018 / DEG,
            cn_drer: 0.0018 / DEG,
            cm_alpha: -0.5,
            pitch_trim_aoa: 0.0,
            cn_beta: 0.06,
            cl_beta: -0.03,
            damp_roll: 0.25,
            damp_pitch: 4.0,
            damp_yaw: 0.04,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), PlantError> {
        let mut problems = Vec::new();
        if !(self.mass > 0.0) {
            problems.push("mass must be positive");
        }
        if self.inertia.m11 <= 0.0 || self.inertia.m22 <= 0.0 || self.inertia.m33 <= 0.0 {
            problems.push("inertia diagonal must be positive");
        }
        if (self.inertia - self.inertia.transpose()).norm() > 1e-12 {
            problems.push("inertia must be symmetric");
        }
        if !(self.rho > 0.0 && self.s_ref > 0.0 && self.span > 0.0 && self.chord > 0.0) {
            problems.push("rho, S, b, c must be positive");
        }
        if !(self.cz0 > self.c0 && self.c0 >= 0.0 && self.cy0 >= 0.0) {
            problems.push("aero coefficients must satisfy cz0 > c0 >= 0, cy0 >= 0");
        }
        if !(self.arm_d > 0.0 && self.arm_e > 0.0 && self.arm_f >= 0.0 && self.eta > 0.0) {
            problems.push("rotor geometry requires d, e > 0, f >= 0, eta > 0");
        }
        if !(self.g0 > 0.0) {
            problems.push("g0 must be positive");
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(PlantError::InvalidParams(problems.join("; ")))
        }
    }

    /// Gravity vector (NED, pointing down).
    pub fn gravity(&self) -> Vec3 {
        K0 * self.g0
    }

    /// Rotor mixing matrix mapping individual thrusts to
    /// `[collective; roll; pitch; yaw]`.
    pub fn mixer_matrix(&self) -> Matrix4<f64> {
        let (d, e, f, n) = (self.arm_d, self.arm_e, self.arm_f, self.eta);
        Matrix4::new(
            1.0, 1.0, 1.0, 1.0, //
            d, -d, d, -d, //
            e - f, -e - f, -e - f, e - f, //
            n, n, -n, -n,
        )
    }

    /// Surface allocation matrix: `M_fw = rho |v_a|^2 B [da, drel, drer]`.
    pub fn surface_matrix(&self) -> Matrix3<f64> {
        let (b, c) = (self.span, self.chord);
        0.5 * self.s_ref
            * Matrix3::new(
                b * self.cl_da, b * self.cl_drel, b * self.cl_drer, //
                c * self.cm_da, c * self.cm_drel, c * self.cm_drer, //
                b * self.cn_da, b * self.cn_drel, b * self.cn_drer,
            )
    }
}

/// Rigid-body state: position/velocity in inertial NED coordinates,
/// attitude as body axes in inertial coordinates, angular rate in body
/// coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub attitude: BodyFrame,
    pub angular_rate: Vec3,
}

impl VehicleState {
    pub fn at_rest(position: Vec3) -> Self {
        VehicleState {
            position,
            velocity: Vec3::zeros(),
            attitude: BodyFrame::IDENTITY,
            angular_rate: Vec3::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        [
            self.position,
            self.velocity,
            self.attitude.i,
            self.attitude.j,
            self.attitude.k,
            self.angular_rate,
        ]
        .iter()
        .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// Commanded actuator set: four lift-rotor thrusts, pusher thrust (N) and
/// three surface deflections (aileron, left/right ruddervator), rad.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActuatorCommand {
    pub rotors: [f64; 4],
    pub pusher: f64,
    pub aileron: f64,
    pub ruddervator_l: f64,
    pub ruddervator_r: f64,
}

impl ActuatorCommand {
    pub fn clamped(&self, lim: &ActuatorLimits) -> ActuatorCommand {
        let mut c = *self;
        for t in c.rotors.iter_mut() {
            *t = t.clamp(0.0, lim.rotor_max);
        }
        c.pusher = c.pusher.clamp(0.0, lim.pusher_max);
        c.aileron = c.aileron.clamp(-lim.surface_max, lim.surface_max);
        c.ruddervator_l = c.ruddervator_l.clamp(-lim.surface_max, lim.surface_max);
        c.ruddervator_r = c.ruddervator_r.clamp(-lim.surface_max, lim.surface_max);
        c
    }

    pub fn surfaces(&self) -> Vec3 {
        Vec3::new(self.aileron, self.ruddervator_l, self.ruddervator_r)
    }
}

/// Actuation envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorLimits {
    pub rotor_max: f64,
    pub pusher_max: f64,
    /// Symmetric surface deflection bound, rad.
    pub surface_max: f64,
}

impl Default for ActuatorLimits {
    fn default() -> Self {
        ActuatorLimits { rotor_max: 80.0, pusher_max: 60.0, surface_max: 30.0 * DEG }
    }
}

/// Realized actuator values behind first-order lags.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorState {
    pub realized: ActuatorCommand,
    pub tau_rotor: f64,
    pub tau_surface: f64,
    pub limits: ActuatorLimits,
}

impl ActuatorState {
    pub fn new(tau_rotor: f64, tau_surface: f64, limits: ActuatorLimits) -> Self {
        ActuatorState { realized: ActuatorCommand::default(), tau_rotor, tau_surface, limits }
    }

    /// Starts with the lag states already settled on `cmd`.
    pub fn settled(cmd: ActuatorCommand, tau_rotor: f64, tau_surface: f64, limits: ActuatorLimits) -> Self {
        ActuatorState { realized: cmd.clamped(&limits), tau_rotor, tau_surface, limits }
    }
}

impl Default for ActuatorState {
    fn default() -> Self {
        // 40 ms rotor lag: slow enough to be realistic for the lift
        // rotors, fast enough that the rate loops keep their phase margin
        // (60 ms tips the hover attitude oscillation unstable).
        ActuatorState::new(0.04, 0.03, ActuatorLimits::default())
    }
}

/// Advances the actuator lag states toward `cmd` over `dt` and clamps to
/// the envelope. Exact discretization of the first-order lag, so a step
/// input reaches 63.2% after one time constant regardless of step size.
pub fn actuator_step(cmd: &ActuatorCommand, act: &ActuatorState, dt: f64) -> ActuatorState {
    debug_assert!(dt > 0.0);
    let target = cmd.clamped(&act.limits);
    let ar = 1.0 - (-dt / act.tau_rotor).exp();
    let asf = 1.0 - (-dt / act.tau_surface).exp();
    let mut r = act.realized;
    for (x, t) in r.rotors.iter_mut().zip(target.rotors.iter()) {
        *x += (t - *x) * ar;
    }
    r.pusher += (target.pusher - r.pusher) * ar;
    r.aileron += (target.aileron - r.aileron) * asf;
    r.ruddervator_l += (target.ruddervator_l - r.ruddervator_l) * asf;
    r.ruddervator_r += (target.ruddervator_r - r.ruddervator_r) * asf;
    ActuatorState { realized: r.clamped(&act.limits), ..*act }
}

/// Ambient conditions. Wind is the steady inertial wind vector; the
/// optional gust seed drives a low-pass filtered random perturbation in
/// the simulation harness (zero intensity disables it).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Environment {
    pub wind: Vec3,
    pub gust_seed: Option<u64>,
    pub gust_intensity: f64,
}

/// Bounded aerodynamic force model evaluated on the zero-lift axes of
/// `att`. Well defined at `v_a = 0`, where it vanishes.
pub fn aero_force(v_a: &Vec3, att: &BodyFrame, p: &VehicleParams) -> Vec3 {
    let (i2, k2) = att.zero_lift_axes(p.alpha0);
    let q = 0.5 * p.rho * p.s_ref * v_a.norm();
    -q * (p.c0 * v_a.dot(&i2) * i2 + p.cy0 * v_a.dot(&att.j) * att.j + p.cz0 * v_a.dot(&k2) * k2)
}

/// Total thrust force in inertial coordinates: lift rotors pull along
/// `-k`, the pusher along `+i`.
pub fn thrust_force(t_mc: f64, t_push: f64, att: &BodyFrame) -> Result<Vec3, PlantError> {
    if t_mc < 0.0 {
        return Err(PlantError::NegativeThrust(t_mc));
    }
    if t_push < 0.0 {
        return Err(PlantError::NegativeThrust(t_push));
    }
    Ok(att.k * (-t_mc) + att.i * t_push)
}

/// Passive aerodynamic torque (body coordinates): static pitch/yaw/roll
/// stiffness with respect to the airflow direction plus rotational
/// damping. Vanishes together with the angular rate when the airflow is
/// along the zero-lift line (default trim).
pub fn aero_torque(omega: &Vec3, v_a: &Vec3, att: &BodyFrame, p: &VehicleParams) -> Vec3 {
    let (i2, k2) = att.zero_lift_axes(p.alpha0);
    let speed = v_a.norm();
    let qbar_s = 0.5 * p.rho * p.s_ref * speed * speed;

    // Airflow angles measured from the zero-lift line; atan2(0, 0) = 0
    // keeps the expression defined at rest, where q-bar vanishes anyway.
    let aoa_zl = v_a.dot(&k2).atan2(v_a.dot(&i2));
    let beta = if speed > 1e-9 { (v_a.dot(&att.j) / speed).clamp(-1.0, 1.0).asin() } else { 0.0 };

    let static_torque = Vec3::new(
        qbar_s * p.span * p.cl_beta * beta,
        qbar_s * p.chord * p.cm_alpha * (aoa_zl - p.pitch_trim_aoa),
        qbar_s * p.span * p.cn_beta * beta,
    );
    let damp_scale = 0.5 * p.rho * p.s_ref * speed;
    let damping = -damp_scale
        * Vec3::new(
            p.damp_roll * p.span * p.span * omega.x,
            p.damp_pitch * p.chord * p.chord * omega.y,
            p.damp_yaw * p.span * p.span * omega.z,
        );
    static_torque + damping
}

/// Forward wrench of a realized actuator set (body frame): collective
/// thrust and rotor differential torque via the mixer matrix, surface
/// torque via the surface matrix scaled by dynamic pressure. Returns
/// `(collective, pusher, control torque)`.
pub fn actuator_wrench(act: &ActuatorCommand, v_a: &Vec3, p: &VehicleParams) -> (f64, f64, Vec3) {
    let t = Vector4::from_column_slice(&act.rotors);
    let w = p.mixer_matrix() * t;
    let m_rotors = Vec3::new(w[1], w[2], w[3]);
    let m_surfaces = p.rho * v_a.norm_squared() * (p.surface_matrix() * act.surfaces());
    (w[0], act.pusher, m_rotors + m_surfaces)
}

#[derive(Clone, Copy)]
struct StateDerivative {
    dr: Vec3,
    dv: Vec3,
    di: Vec3,
    dj: Vec3,
    dk: Vec3,
    domega: Vec3,
}

fn derivative(
    s: &VehicleState,
    act: &ActuatorCommand,
    env: &Environment,
    p: &VehicleParams,
    inertia_inv: &Matrix3<f64>,
) -> StateDerivative {
    let v_a = s.velocity - env.wind;
    let (t_mc, t_push, m_ctl) = actuator_wrench(act, &v_a, p);
    let f_aero = aero_force(&v_a, &s.attitude, p);
    let thrust = s.attitude.k * (-t_mc) + s.attitude.i * t_push;
    let dv = p.gravity() + (f_aero + thrust) / p.mass;

    let omega_inertial = s.attitude.from_body(&s.angular_rate);
    let m_a = aero_torque(&s.angular_rate, &v_a, &s.attitude, p);
    let j_omega = p.inertia * s.angular_rate;
    let domega = inertia_inv * (-skew(&s.angular_rate) * j_omega + m_a + m_ctl);

    StateDerivative {
        dr: s.velocity,
        dv,
        di: omega_inertial.cross(&s.attitude.i),
        dj: omega_inertial.cross(&s.attitude.j),
        dk: omega_inertial.cross(&s.attitude.k),
        domega,
    }
}

fn advance(s: &VehicleState, d: &StateDerivative, h: f64) -> VehicleState {
    VehicleState {
        position: s.position + d.dr * h,
        velocity: s.velocity + d.dv * h,
        attitude: BodyFrame {
            i: s.attitude.i + d.di * h,
            j: s.attitude.j + d.dj * h,
            k: s.attitude.k + d.dk * h,
        },
        angular_rate: s.angular_rate + d.domega * h,
    }
}

/// One RK4 step of the rigid-body dynamics with the realized actuator
/// values held constant over the step; the attitude is re-orthonormalized
/// afterwards.
pub fn plant_step(
    s: &VehicleState,
    act: &ActuatorState,
    env: &Environment,
    p: &VehicleParams,
    dt: f64,
) -> Result<VehicleState, PlantError> {
    debug_assert!(dt > 0.0 && dt <= 0.02, "plant_step expects dt in (0, 0.02]");
    let inertia_inv = p
        .inertia
        .try_inverse()
        .ok_or_else(|| PlantError::InvalidParams("inertia not invertible".into()))?;
    let cmd = &act.realized;
    let k1 = derivative(s, cmd, env, p, &inertia_inv);
    let k2 = derivative(&advance(s, &k1, dt / 2.0), cmd, env, p, &inertia_inv);
    let k3 = derivative(&advance(s, &k2, dt / 2.0), cmd, env, p, &inertia_inv);
    let k4 = derivative(&advance(s, &k3, dt), cmd, env, p, &inertia_inv);

    let combined = StateDerivative {
        dr: (k1.dr + 2.0 * k2.dr + 2.0 * k3.dr + k4.dr) / 6.0,
        dv: (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv) / 6.0,
        di: (k1.di + 2.0 * k2.di + 2.0 * k3.di + k4.di) / 6.0,
        dj: (k1.dj + 2.0 * k2.dj + 2.0 * k3.dj + k4.dj) / 6.0,
        dk: (k1.dk + 2.0 * k2.dk + 2.0 * k3.dk + k4.dk) / 6.0,
        domega: (k1.domega + 2.0 * k2.domega + 2.0 * k3.domega + k4.domega) / 6.0,
    };
    let mut next = advance(s, &combined, dt);
    next.attitude = next.attitude.orthonormalized().map_err(|_| PlantError::NonFiniteState)?;
    if !next.is_finite() {
        return Err(PlantError::NonFiniteState);
    }
    Ok(next)
}

/// Affine PWM calibration of one channel: `lo` maps to 1000 us and `hi`
/// to 2000 us, quantized to 1 us.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelCal {
    pub lo: f64,
    pub hi: f64,
}

impl ChannelCal {
    pub fn encode(&self, x: f64) -> u16 {
        let frac = ((x - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0);
        (1000.0 + 1000.0 * frac).round() as u16
    }

    pub fn decode(&self, pwm: u16) -> Result<f64, PlantError> {
        if !(1000..=2000).contains(&pwm) {
            return Err(PlantError::PwmOutOfRange(pwm));
        }
        Ok(self.lo + (pwm as f64 - 1000.0) / 1000.0 * (self.hi - self.lo))
    }
}

/// Per-channel-kind PWM calibration for the full actuator set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PwmCalibration {
    pub rotor: ChannelCal,
    pub pusher: ChannelCal,
    pub surface: ChannelCal,
}

impl PwmCalibration {
    pub fn from_limits(lim: &ActuatorLimits) -> Self {
        PwmCalibration {
            rotor: ChannelCal { lo: 0.0, hi: lim.rotor_max },
            pusher: ChannelCal { lo: 0.0, hi: lim.pusher_max },
            surface: ChannelCal { lo: -lim.surface_max, hi: lim.surface_max },
        }
    }
}

/// PWM encodings for one actuator command, channel order
/// `[rotor1..rotor4, pusher, aileron, ruddervator_l, ruddervator_r]`.
pub fn pwm_encode(cmd: &ActuatorCommand, cal: &PwmCalibration) -> [u16; 8] {
    [
        cal.rotor.encode(cmd.rotors[0]),
        cal.rotor.encode(cmd.rotors[1]),
        cal.rotor.encode(cmd.rotors[2]),
        cal.rotor.encode(cmd.rotors[3]),
        cal.pusher.encode(cmd.pusher),
        cal.surface.encode(cmd.aileron),
        cal.surface.encode(cmd.ruddervator_l),
        cal.surface.encode(cmd.ruddervator_r),
    ]
}

pub fn pwm_decode(pwm: &[u16; 8], cal: &PwmCalibration) -> Result<ActuatorCommand, PlantError> {
    Ok(ActuatorCommand {
        rotors: [
            cal.rotor.decode(pwm[0])?,
            cal.rotor.decode(pwm[1])?,
            cal.rotor.decode(pwm[2])?,
            cal.rotor.decode(pwm[3])?,
        ],
        pusher: cal.pusher.decode(pwm[4])?,
        aileron: cal.surface.decode(pwm[5])?,
        ruddervator_l: cal.surface.decode(pwm[6])?,
        ruddervator_r: cal.surface.decode(pwm[7])?,
    })
}

/// Rotor command set that exactly balances the weight with zero torque.
pub fn hover_command(p: &VehicleParams) -> ActuatorCommand {
    let t = p
        .mixer_matrix()
        .try_inverse()
        .expect("mixer invertible")
        * Vector4::new(p.mass * p.g0, 0.0, 0.0, 0.0);
    ActuatorCommand { rotors: [t[0], t[1], t[2], t[3]], ..Default::default() }
}
