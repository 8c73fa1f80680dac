//! Thrust-vector and attitude setpoint computation: analytically inverts
//! gravity + aerodynamic force + thrust so that the resulting frame and
//! thrust pair produce the requested acceleration.
//!
//! Two thrust-constraint modes exist (imposed thrust direction or imposed
//! pitch angle) and two lateral modes (imposed yaw for hover-style flight,
//! balanced/zero-sideslip flight for wing-borne flight). Working with the
//! apparent acceleration `a' = a_r - g` keeps the construction defined at
//! zero airspeed, where angle-of-attack parametrizations break down.

use crate::geom::{wrap_angle, BodyFrame, Vec3, K0};
use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum SolverError {
    #[error("apparent acceleration is near zero; attitude undefined")]
    DegenerateApparentAcceleration,
    #[error("lateral axis is vertical; pitch frame undefined")]
    VerticalLateralAxis,
    #[error("lateral axis construction degenerate and no held value available")]
    DegenerateLateralAxis,
}

/// Cross products with norms below this are treated as singular and fall
/// back to the held lateral axis.
pub const SINGULARITY_EPS: f64 = 1e-6;

/// Subset of the vehicle model the inversion relies on. In multicopter
/// piloting the aerodynamic terms are switched off by zeroing `c0`/`cz0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverModel {
    pub mass: f64,
    pub g0: f64,
    pub rho: f64,
    pub s_ref: f64,
    pub c0: f64,
    pub cz0: f64,
    pub alpha0: f64,
}

impl SolverModel {
    pub fn from_params(p: &crate::plant::VehicleParams) -> Self {
        SolverModel {
            mass: p.mass,
            g0: p.g0,
            rho: p.rho,
            s_ref: p.s_ref,
            c0: p.c0,
            cz0: p.cz0,
            alpha0: p.alpha0,
        }
    }

    /// Copy with the aerodynamic coefficients zeroed (hover-style piloting).
    pub fn without_aero(&self) -> Self {
        SolverModel { c0: 0.0, cz0: 0.0, ..*self }
    }
}

/// Thrust-side constraint: either the thrust direction angle (rad,
/// `-pi/2` pure lift, `0` pure pusher) or the vehicle pitch angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThrustMode {
    ImposedThrustDir(f64),
    ImposedPitch(f64),
}

/// Lateral-axis constraint: a desired yaw angle or balanced (zero
/// side-slip) flight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LateralMode {
    Yaw(f64),
    Balanced,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverInput {
    /// Desired acceleration, m/s^2 (inertial).
    pub accel_r: Vec3,
    /// Estimated air velocity, m/s (inertial).
    pub v_a: Vec3,
    pub thrust: ThrustMode,
    pub lateral: LateralMode,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOutput {
    pub frame_r: BodyFrame,
    /// Desired thrust norm, N (clamped at zero when the inversion asks for
    /// a negative norm; see `thrust_clamped`).
    pub thrust_norm: f64,
    /// Desired thrust direction angle, rad, wrapped to `[-pi, pi)`.
    pub gamma_t_r: f64,
    /// Lift-rotor collective magnitude `|T| |sin gamma|`, N.
    pub t_mc_r: f64,
    /// Pusher magnitude `|T| |cos gamma|`, N. `gamma_t_r` carries the sign
    /// information: `|gamma| > pi/2` means the solution wants reverse
    /// thrust, which the allocation clamps to zero.
    pub t_fw_r: f64,
    /// Tilt of the solved frame from the apparent-acceleration direction
    /// (case 1) or the imposed pitch angle (case 2), rad.
    pub tilt_gamma: f64,
    pub thrust_clamped: bool,
}

/// One-step memory for the lateral axis: held across calls to bridge
/// cross-product singularities and re-initialized from the current
/// attitude on lateral-mode switches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverState {
    held_j_r: Vec3,
    last_mode_was_yaw: Option<bool>,
}

impl SolverState {
    pub fn new(initial_j: Vec3) -> Self {
        SolverState { held_j_r: initial_j, last_mode_was_yaw: None }
    }

    pub fn held_lateral_axis(&self) -> Vec3 {
        self.held_j_r
    }
}

impl Default for SolverState {
    fn default() -> Self {
        SolverState::new(crate::geom::J0)
    }
}

/// Intermediate vectors of the inversion: apparent acceleration `a'` and
/// the force-like combinations `d` (axial) and `e` (normal).
pub fn intermediate_vectors(input: &SolverInput, model: &SolverModel) -> (Vec3, Vec3, Vec3) {
    let a_prime = input.accel_r - model.g0 * K0;
    let q = 0.5 * model.rho * model.s_ref * input.v_a.norm();
    let d = model.mass * a_prime + q * model.c0 * input.v_a;
    let e = model.mass * a_prime + q * model.cz0 * input.v_a;
    (a_prime, d, e)
}

/// Lateral (right-wing) axis from the yaw or balanced-flight constraint.
/// Near the cross-product singularity the held axis is reused; the caller
/// resets the hold on mode switches through [`solve`].
pub fn lateral_axis(
    input: &SolverInput,
    a_prime: &Vec3,
    state: &mut SolverState,
) -> Result<Vec3, SolverError> {
    let cross = match input.lateral {
        LateralMode::Yaw(psi_r) => {
            let h_psi = Vec3::new(psi_r.cos(), psi_r.sin(), 0.0);
            h_psi.cross(a_prime)
        }
        LateralMode::Balanced => input.v_a.cross(a_prime),
    };
    let n = cross.norm();
    let j_r = if n < SINGULARITY_EPS {
        let held = state.held_j_r;
        if held.norm() < 0.5 {
            return Err(SolverError::DegenerateLateralAxis);
        }
        held.normalize()
    } else {
        cross / n
    };
    state.held_j_r = j_r;
    Ok(j_r)
}

/// Case 1 (imposed thrust direction): solves the frame tilt `gamma` so
/// that the axial/normal force balance holds with the imposed `gamma_t_r`.
pub fn solve_imposed_thrust_dir(
    gamma_t_r: f64,
    a_prime: &Vec3,
    d: &Vec3,
    e: &Vec3,
    j_r: &Vec3,
    alpha0: f64,
) -> Result<SolverOutput, SolverError> {
    let na = a_prime.norm();
    if na < 1e-9 {
        return Err(SolverError::DegenerateApparentAcceleration);
    }
    let a_perp = a_prime.cross(j_r);
    let nap = a_perp.norm();
    if nap < 1e-9 {
        return Err(SolverError::DegenerateApparentAcceleration);
    }
    let phi = gamma_t_r + alpha0;
    let (sin_phi, cos_phi) = phi.sin_cos();
    let y = sin_phi * d.dot(a_prime) - cos_phi * e.dot(&a_perp);
    let x = cos_phi * e.dot(a_prime) + sin_phi * d.dot(&a_perp);
    let gamma = wrap_angle(y.atan2(x) - alpha0);

    let build = |gamma: f64| -> Result<SolverOutput, SolverError> {
        let (sin_g, cos_g) = gamma.sin_cos();
        let k_r = sin_g * (a_prime / na) + cos_g * (a_perp / nap);
        let i_r = j_r.cross(&k_r);
        let frame_r = BodyFrame { i: i_r, j: *j_r, k: k_r }
            .orthonormalized()
            .map_err(|_| SolverError::DegenerateApparentAcceleration)?;
        Ok(finish(frame_r, gamma_t_r, gamma, d, e, alpha0))
    };
    // The tilt equation has two solutions pi apart; only one carries a
    // non-negative thrust norm. Take the other branch when the principal
    // one would demand negative thrust.
    let out = build(gamma)?;
    if out.thrust_clamped {
        let flipped = build(wrap_angle(gamma + std::f64::consts::PI))?;
        if !flipped.thrust_clamped {
            return Ok(flipped);
        }
    }
    Ok(out)
}

/// Case 2 (imposed pitch angle): the frame follows directly from the
/// pitch constraint and the lateral axis; the thrust direction is solved.
pub fn solve_imposed_pitch(
    theta_r: f64,
    d: &Vec3,
    e: &Vec3,
    j_r: &Vec3,
    alpha0: f64,
) -> Result<SolverOutput, SolverError> {
    let eta_raw = j_r.cross(&K0);
    let n_eta = eta_raw.norm();
    if n_eta < 1e-9 {
        return Err(SolverError::VerticalLateralAxis);
    }
    let eta = eta_raw / n_eta;
    let eta_perp_raw = j_r.cross(&eta);
    let eta_perp = eta_perp_raw / eta_perp_raw.norm();
    let (sin_t, cos_t) = theta_r.sin_cos();
    let i_r = cos_t * eta + sin_t * eta_perp;
    let k_r = i_r.cross(j_r);
    let frame_r = BodyFrame { i: i_r, j: *j_r, k: k_r }
        .orthonormalized()
        .map_err(|_| SolverError::VerticalLateralAxis)?;

    let (sin_a0, cos_a0) = alpha0.sin_cos();
    let y = sin_a0 * e.dot(&frame_r.i) + cos_a0 * e.dot(&frame_r.k);
    let x = cos_a0 * d.dot(&frame_r.i) - sin_a0 * d.dot(&frame_r.k);
    let gamma_t_r = wrap_angle(y.atan2(x) - alpha0);

    Ok(finish(frame_r, gamma_t_r, theta_r, d, e, alpha0))
}

/// Desired thrust norm for a solved frame and thrust direction (the
/// four-term axial/normal recombination). May be negative for infeasible
/// demands; callers clamp.
pub fn thrust_norm(d: &Vec3, e: &Vec3, i_r: &Vec3, k_r: &Vec3, gamma_t_r: f64, alpha0: f64) -> f64 {
    let (sin_phi, cos_phi) = (gamma_t_r + alpha0).sin_cos();
    let (sin_a0, cos_a0) = alpha0.sin_cos();
    cos_phi * cos_a0 * d.dot(i_r) - cos_phi * sin_a0 * d.dot(k_r)
        + sin_phi * sin_a0 * e.dot(i_r)
        + sin_phi * cos_a0 * e.dot(k_r)
}

fn finish(frame_r: BodyFrame, gamma_t_r: f64, tilt: f64, d: &Vec3, e: &Vec3, alpha0: f64) -> SolverOutput {
    let raw_norm = thrust_norm(d, e, &frame_r.i, &frame_r.k, gamma_t_r, alpha0);
    let clamped = raw_norm < 0.0;
    let t = raw_norm.max(0.0);
    SolverOutput {
        frame_r,
        thrust_norm: t,
        gamma_t_r,
        t_mc_r: t * gamma_t_r.sin().abs(),
        t_fw_r: t * gamma_t_r.cos().abs(),
        tilt_gamma: tilt,
        thrust_clamped: clamped,
    }
}

/// Full inversion: intermediate vectors, lateral axis (with hold and
/// mode-switch re-initialization from `attitude_j`), then the imposed
/// thrust-direction or imposed-pitch solution.
pub fn solve(
    input: &SolverInput,
    model: &SolverModel,
    state: &mut SolverState,
    attitude_j: &Vec3,
) -> Result<SolverOutput, SolverError> {
    let is_yaw = matches!(input.lateral, LateralMode::Yaw(_));
    if state.last_mode_was_yaw != Some(is_yaw) {
        // Lateral-mode switch: restart the hold from the flown attitude.
        state.held_j_r = *attitude_j;
        state.last_mode_was_yaw = Some(is_yaw);
    }
    let (a_prime, d, e) = intermediate_vectors(input, model);
    let j_r = lateral_axis(input, &a_prime, state)?;
    match input.thrust {
        ThrustMode::ImposedThrustDir(g) => {
            solve_imposed_thrust_dir(g, &a_prime, &d, &e, &j_r, model.alpha0)
        }
        ThrustMode::ImposedPitch(t) => solve_imposed_pitch(t, &d, &e, &j_r, model.alpha0),
    }
}

/// Force-balance residual of a solver output: `|a' - (F_a + T_r)/m|`,
/// with the aerodynamic force evaluated on the zero-lift axes of the
/// solved frame and the thrust applied along the solved direction. This
/// is the independent check that the inversion actually solves the
/// translation-dynamics equation.
pub fn force_balance_residual(
    input: &SolverInput,
    model: &SolverModel,
    out: &SolverOutput,
) -> f64 {
    let a_prime = input.accel_r - model.g0 * K0;
    let (i2r, k2r) = out.frame_r.zero_lift_axes(model.alpha0);
    let q = 0.5 * model.rho * model.s_ref * input.v_a.norm();
    let f_a = -q
        * (model.c0 * input.v_a.dot(&i2r) * i2r + model.cz0 * input.v_a.dot(&k2r) * k2r);
    let (sin_phi, cos_phi) = (out.gamma_t_r + model.alpha0).sin_cos();
    let thrust = out.thrust_norm * (cos_phi * i2r + sin_phi * k2r);
    (a_prime - (f_a + thrust) / model.mass).norm()
}
