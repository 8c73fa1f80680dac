//! Attitude control, angular-rate control and blended torque allocation.
//!
//! The attitude loop produces a desired angular velocity from the frame
//! error with per-axis gains; the rate loop turns the rate error into a
//! control torque (reduced PI form by default); the torque is then split
//! between rotor differential thrust and aerodynamic surfaces by the
//! blending coefficient and mapped to actuators through the mixer and
//! surface matrices, with prioritized desaturation.

use crate::geom::{frame_error_vector, sat_scalar, BodyFrame, Vec3};
use crate::plant::{ActuatorLimits, VehicleParams};
use nalgebra::{Matrix3, Matrix4, Vector4};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AllocationError {
    #[error("mixer matrix is not invertible")]
    SingularMixer,
    #[error("surface matrix is not invertible")]
    SingularSurfaceMatrix,
}

/// Attitude and angular-rate gains.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerGains {
    /// Per-axis attitude gains (roll, pitch, yaw), 1/s.
    pub k_i_axis: f64,
    pub k_j_axis: f64,
    pub k_k_axis: f64,
    /// Rate proportional gains (diagonal of K_P,omega), 1/s.
    pub k_p_omega: Vec3,
    /// Rate integral gains, N m per rad.
    pub k_i_omega: Vec3,
    /// Rate integrator bounds, N m.
    pub delta_i_omega: Vec3,
    /// Enables the reference angular-velocity feedforward term.
    pub feedforward: bool,
    /// Adds Coriolis and reference-rate-derivative compensation to the
    /// torque law (the reduced form omits them).
    pub full_torque_law: bool,
}

impl Default for InnerGains {
    fn default() -> Self {
        InnerGains {
            k_i_axis: 6.0,
            k_j_axis: 6.0,
            k_k_axis: 1.8,
            k_p_omega: Vec3::new(11.0, 12.0, 4.75),
            k_i_omega: Vec3::new(10.0, 25.0, 0.15),
            delta_i_omega: Vec3::new(3.5, 8.0, 0.5),
            feedforward: true,
            full_torque_law: false,
        }
    }
}

impl InnerGains {
    pub fn min_attitude_gain(&self) -> f64 {
        self.k_i_axis.min(self.k_j_axis).min(self.k_k_axis)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.k_i_axis > 0.0 && self.k_j_axis > 0.0 && self.k_k_axis > 0.0) {
            return Err("attitude gains must be positive".into());
        }
        if self.k_p_omega.iter().any(|&g| g <= 0.0) {
            return Err("rate proportional gains must be positive".into());
        }
        if self.k_i_omega.iter().any(|&g| g < 0.0) || self.delta_i_omega.iter().any(|&d| d < 0.0) {
            return Err("rate integral gains and bounds must be non-negative".into());
        }
        Ok(())
    }
}

/// Desired angular velocity (inertial coordinates) from the frame error,
/// with per-axis gains applied along the current body axes and an optional
/// feedforward of the reference-frame angular velocity.
///
/// The feedforward derivative comes from a backward finite difference of
/// the reference frame over `dt_ref` (zero on the first sample or when
/// disabled).
pub fn attitude_ctl(
    att: &BodyFrame,
    frame_r: &BodyFrame,
    frame_r_prev: Option<&BodyFrame>,
    dt_ref: f64,
    g: &InnerGains,
) -> Vec3 {
    let omega0 = frame_error_vector(att, frame_r);
    let feedback = g.k_i_axis * omega0.dot(&att.i) * att.i
        + g.k_j_axis * omega0.dot(&att.j) * att.j
        + g.k_k_axis * omega0.dot(&att.k) * att.k;

    let ff = match (g.feedforward, frame_r_prev) {
        (true, Some(prev)) if dt_ref > 0.0 => {
            let dk = (frame_r.k - prev.k) / dt_ref;
            let dj = (frame_r.j - prev.j) / dt_ref;
            frame_r.k.cross(&dk) + (frame_r.j.cross(&dj).dot(&frame_r.k)) * frame_r.k
        }
        _ => Vec3::zeros(),
    };
    feedback + ff
}

/// Angular-rate integrator state (body coordinates), N m.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RateIntegrator {
    pub torque: Vec3,
}

/// Rate loop: control torque from the rate error (body coordinates).
/// Reduced form `M_r = -K_P J w~ - I` by default; with the full torque law
/// the Coriolis term and the reference-rate derivative are compensated
/// (`omega_r_dot` by backward difference, supplied by the caller).
/// The integrator freezes per component at its bound while the error keeps
/// pushing outward.
pub fn rate_ctl(
    omega: &Vec3,
    omega_r: &Vec3,
    omega_r_dot: Option<&Vec3>,
    integ: &RateIntegrator,
    inertia: &Matrix3<f64>,
    g: &InnerGains,
    dt: f64,
) -> (Vec3, RateIntegrator) {
    let err = omega - omega_r;
    let mut m_r = -inertia * err.component_mul(&g.k_p_omega) - integ.torque;
    if g.full_torque_law {
        m_r += omega.cross(&(inertia * omega));
        if let Some(wrd) = omega_r_dot {
            m_r += inertia * wrd;
        }
    }
    let mut next = integ.torque;
    for axis in 0..3 {
        let frozen = next[axis].abs() >= g.delta_i_omega[axis] && next[axis] * err[axis] > 0.0;
        if !frozen {
            next[axis] = sat_scalar(
                next[axis] + g.k_i_omega[axis] * err[axis] * dt,
                -g.delta_i_omega[axis],
                g.delta_i_omega[axis],
            );
        }
    }
    (m_r, RateIntegrator { torque: next })
}

/// Splits the control torque between rotors and surfaces: `(1-lambda)` to
/// differential thrust, `lambda` to the surfaces. The rotor share is the
/// exact complement so the two parts always sum to the input.
pub fn blend_torque(m_r: &Vec3, lambda: f64) -> (Vec3, Vec3) {
    debug_assert!((0.0..=1.0).contains(&lambda));
    let fw = m_r * lambda;
    (m_r - fw, fw)
}

/// Precomputed allocation matrices and actuator envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationConfig {
    pub mixer: Matrix4<f64>,
    pub mixer_inv: Matrix4<f64>,
    pub surface: Matrix3<f64>,
    pub surface_inv: Matrix3<f64>,
    pub limits: ActuatorLimits,
    pub rho: f64,
    /// Minimum airspeed used in the surface dynamic-pressure inversion;
    /// prevents a 1/|v_a|^2 blowup near hover, where the surfaces are
    /// ineffective and the blending assigns them no torque anyway.
    pub q_clamp_speed: f64,
}

impl AllocationConfig {
    pub fn from_params(p: &VehicleParams, limits: ActuatorLimits) -> Result<Self, AllocationError> {
        let mixer = p.mixer_matrix();
        let mixer_inv = mixer.try_inverse().ok_or(AllocationError::SingularMixer)?;
        let surface = p.surface_matrix();
        let surface_inv = surface.try_inverse().ok_or(AllocationError::SingularSurfaceMatrix)?;
        Ok(AllocationConfig {
            mixer,
            mixer_inv,
            surface,
            surface_inv,
            limits,
            rho: p.rho,
            q_clamp_speed: 4.0,
        })
    }
}

/// Rotor allocation result with desaturation diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorAllocation {
    pub thrusts: [f64; 4],
    /// Wrench actually realizable after desaturation.
    pub realized: Vector4<f64>,
    pub saturated: bool,
}

/// Computes individual rotor thrusts from the collective and rotor torque
/// demands via the mixer inverse, then desaturates with the priority
/// collective >= roll = pitch > yaw.
pub fn allocate_rotors(t_mc_r: f64, m_mc_r: &Vec3, cfg: &AllocationConfig) -> RotorAllocation {
    let wrench = Vector4::new(t_mc_r.max(0.0), m_mc_r.x, m_mc_r.y, m_mc_r.z);
    desaturate_rotors(&wrench, cfg)
}

/// Prioritized rotor desaturation in wrench space: the collective is
/// clamped to the feasible band first, roll/pitch torque is scaled to fit
/// around it, and yaw authority is sacrificed last.
pub fn desaturate_rotors(wrench: &Vector4<f64>, cfg: &AllocationConfig) -> RotorAllocation {
    let lo = 0.0;
    let hi = cfg.limits.rotor_max;
    // The collective alone must map to feasible thrusts (the split is not
    // exactly even when the quad centre is offset from the CoM).
    let mut collective = wrench[0].max(4.0 * lo);
    let mut t_coll = cfg.mixer_inv * Vector4::new(collective, 0.0, 0.0, 0.0);
    let worst = t_coll.max();
    if worst > hi {
        collective *= hi / worst;
        t_coll = cfg.mixer_inv * Vector4::new(collective, 0.0, 0.0, 0.0);
    }
    let t_rp = cfg.mixer_inv * Vector4::new(0.0, wrench[1], wrench[2], 0.0);
    let t_yaw = cfg.mixer_inv * Vector4::new(0.0, 0.0, 0.0, wrench[3]);

    // Largest k in [0, 1] keeping base + k * delta inside [lo, hi].
    let fit = |base: &Vector4<f64>, delta: &Vector4<f64>| -> f64 {
        let mut k: f64 = 1.0;
        for i in 0..4 {
            if delta[i] > 1e-12 {
                k = k.min((hi - base[i]) / delta[i]);
            } else if delta[i] < -1e-12 {
                k = k.min((lo - base[i]) / delta[i]);
            }
        }
        k.clamp(0.0, 1.0)
    };

    let k_rp = fit(&t_coll, &t_rp);
    let with_rp = t_coll + k_rp * t_rp;
    let k_yaw = fit(&with_rp, &t_yaw);
    let mut t = with_rp + k_yaw * t_yaw;
    for i in 0..4 {
        t[i] = t[i].clamp(lo, hi);
    }
    let realized = cfg.mixer * t;
    let saturated =
        (wrench[0] - collective).abs() > 1e-9 || k_rp < 1.0 - 1e-12 || k_yaw < 1.0 - 1e-12;
    RotorAllocation { thrusts: [t[0], t[1], t[2], t[3]], realized, saturated }
}

/// Surface allocation result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceAllocation {
    pub aileron: f64,
    pub ruddervator_l: f64,
    pub ruddervator_r: f64,
    pub saturated: bool,
}

/// Computes surface deflections from the surface torque demand and the
/// estimated airspeed via the surface-matrix inverse, with a minimum
/// dynamic pressure and prioritized clamping (pitch preserved over yaw on
/// the shared ruddervators).
pub fn allocate_surfaces(m_fw_r: &Vec3, v_a: &Vec3, cfg: &AllocationConfig) -> SurfaceAllocation {
    let speed_sq = v_a.norm_squared().max(cfg.q_clamp_speed * cfg.q_clamp_speed);
    let raw = cfg.surface_inv * (m_fw_r / (cfg.rho * speed_sq));
    let max = cfg.limits.surface_max;

    let aileron = raw[0].clamp(-max, max);
    // The ruddervators carry pitch as a common-mode deflection and yaw as
    // a differential one; keep pitch and shrink the differential to fit.
    let common = 0.5 * (raw[1] + raw[2]);
    let diff = 0.5 * (raw[2] - raw[1]);
    let common_cl = common.clamp(-max, max);
    let diff_headroom = max - common_cl.abs();
    let diff_cl = diff.clamp(-diff_headroom, diff_headroom);
    let (l, r) = (common_cl - diff_cl, common_cl + diff_cl);

    let saturated = (aileron - raw[0]).abs() > 1e-12
        || (l - raw[1]).abs() > 1e-12
        || (r - raw[2]).abs() > 1e-12;
    SurfaceAllocation { aileron, ruddervator_l: l, ruddervator_r: r, saturated }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{rotation_angle_between, J0, K0};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gains() -> InnerGains {
        InnerGains::default()
    }

    fn alloc() -> AllocationConfig {
        AllocationConfig::from_params(&VehicleParams::default(), ActuatorLimits::default()).unwrap()
    }

    #[test]
    fn attitude_ctl_examples() {
        let g = gains();
        let id = BodyFrame::IDENTITY;
        assert_eq!(attitude_ctl(&id, &id, Some(&id), 0.02, &g), Vec3::zeros());

        // 90 degree error about k with the yaw gain: 1.8 * 2 sin(90deg).
        let frame_r = id.rotated_by(&K0, std::f64::consts::FRAC_PI_2);
        let w = attitude_ctl(&id, &frame_r, None, 0.02, &g);
        assert!((w - Vec3::new(0.0, 0.0, 3.6)).norm() < 1e-12);
    }

    #[test]
    fn attitude_feedforward_tracks_spinning_reference() {
        let g = gains();
        let dt = 0.02;
        let spin = 0.7; // rad/s about k0
        let b = BodyFrame::IDENTITY.rotated_by(&K0, 1.0);
        let prev = b.rotated_by(&K0, -spin * dt);
        let w = attitude_ctl(&b, &b, Some(&prev), dt, &g);
        // Zero frame error: the output is the feedforward, which matches
        // the reference angular velocity to first order in dt.
        assert!((w - spin * K0).norm() < spin * dt, "ff = {w:?}");
    }

    #[test]
    fn rate_ctl_examples() {
        let g = gains();
        let p = VehicleParams::default();
        let integ = RateIntegrator::default();
        let (m, i) = rate_ctl(&Vec3::zeros(), &Vec3::zeros(), None, &integ, &p.inertia, &g, 0.004);
        assert_eq!(m, Vec3::zeros());
        assert_eq!(i.torque, Vec3::zeros());

        // 0.1 rad/s roll error: -11 * 0.87 * 0.1.
        let (m, _) = rate_ctl(&Vec3::new(0.1, 0.0, 0.0), &Vec3::zeros(), None, &integ, &p.inertia, &g, 0.004);
        assert!((m - Vec3::new(-0.957, 0.0, 0.0)).norm() < 1e-9);

        // Pitch integrator frozen at its bound while the error pushes out.
        let at_bound = RateIntegrator { torque: Vec3::new(0.0, 8.0, 0.0) };
        let (_, i) = rate_ctl(&Vec3::new(0.0, 0.5, 0.0), &Vec3::zeros(), None, &at_bound, &p.inertia, &g, 0.004);
        assert_eq!(i.torque.y, 8.0);
        let (_, i) = rate_ctl(&Vec3::new(0.0, -0.5, 0.0), &Vec3::zeros(), None, &at_bound, &p.inertia, &g, 0.004);
        assert!(i.torque.y < 8.0);
    }

    #[test]
    fn rate_integrator_stays_bounded() {
        let g = gains();
        let p = VehicleParams::default();
        let mut integ = RateIntegrator::default();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..5000 {
            let w = Vec3::new(
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            );
            let (_, next) = rate_ctl(&w, &Vec3::zeros(), None, &integ, &p.inertia, &g, 0.004);
            integ = next;
            for axis in 0..3 {
                assert!(integ.torque[axis].abs() <= g.delta_i_omega[axis] + 1e-12);
            }
        }
    }

    #[test]
    fn blend_examples() {
        let m = Vec3::new(2.0, 0.0, 0.0);
        assert_eq!(blend_torque(&m, 0.0), (m, Vec3::zeros()));
        assert_eq!(blend_torque(&m, 1.0), (Vec3::zeros(), m));
        let (mc, fw) = blend_torque(&m, 0.5);
        assert_eq!(mc, Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(fw, Vec3::new(1.0, 0.0, 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let m = Vec3::new(
                rng.random_range(-10.0..10.0),
                rng.random_range(-10.0..10.0),
                rng.random_range(-10.0..10.0),
            );
            let lambda = rng.random_range(0.0..1.0);
            let (mc, fw) = blend_torque(&m, lambda);
            // The complement construction loses at most the final-addition
            // rounding: one ulp per component.
            for axis in 0..3 {
                let err = (mc[axis] + fw[axis] - m[axis]).abs();
                assert!(err <= f64::EPSILON * m[axis].abs(), "blend leakage {err}");
            }
        }
        // Bitwise at the endpoints.
        let m = Vec3::new(0.123456, -7.89, 2.5);
        assert_eq!(blend_torque(&m, 0.0), (m, Vec3::zeros()));
        assert_eq!(blend_torque(&m, 1.0), (Vec3::zeros(), m));
    }

    #[test]
    fn rotor_allocation_examples() {
        // Symmetric geometry (f = 0): equal split of the collective.
        let mut p = VehicleParams::default();
        p.arm_f = 0.0;
        let cfg = AllocationConfig::from_params(&p, ActuatorLimits::default()).unwrap();
        let out = allocate_rotors(40.0, &Vec3::zeros(), &cfg);
        for t in out.thrusts {
            assert!((t - 10.0).abs() < 1e-12);
        }
        assert!(!out.saturated);

        // Roll demand solves the d-row: t = (10.5, 9.5, 10.5, 9.5).
        let out = allocate_rotors(40.0, &Vec3::new(1.1, 0.0, 0.0), &cfg);
        let expect = [10.5, 9.5, 10.5, 9.5];
        for (t, e) in out.thrusts.iter().zip(expect) {
            assert!((t - e).abs() < 1e-12, "{:?}", out.thrusts);
        }

        // Stock geometry (f = 0.025): verify through the round trip.
        let cfg = alloc();
        let out = allocate_rotors(40.0, &Vec3::zeros(), &cfg);
        let w = cfg.mixer * Vector4::from_column_slice(&out.thrusts);
        assert!((w - Vector4::new(40.0, 0.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn rotor_round_trip_without_saturation() {
        let cfg = alloc();
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..500 {
            let wrench = Vector4::new(
                rng.random_range(50.0..250.0),
                rng.random_range(-8.0..8.0),
                rng.random_range(-8.0..8.0),
                rng.random_range(-0.8..0.8),
            );
            let out = desaturate_rotors(&wrench, &cfg);
            if !out.saturated {
                let w = cfg.mixer * Vector4::from_column_slice(&out.thrusts);
                assert!((w - wrench).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn desaturation_priority_order() {
        // Collective overflow alone with symmetric geometry: scaled to the
        // full band 4 * t_max, torque preserved at zero.
        let mut p_sym = VehicleParams::default();
        p_sym.arm_f = 0.0;
        let cfg_sym = AllocationConfig::from_params(&p_sym, ActuatorLimits::default()).unwrap();
        let out = desaturate_rotors(&Vector4::new(500.0, 0.0, 0.0, 0.0), &cfg_sym);
        assert!(out.saturated);
        assert!((out.realized[0] - 4.0 * cfg_sym.limits.rotor_max).abs() < 1e-9);
        assert!(out.realized.fixed_rows::<3>(1).norm() < 1e-9);

        // With the offset quad centre the front pair saturates first; the
        // feasible zero-torque collective is below 4 * t_max.
        let cfg = alloc();
        let out = desaturate_rotors(&Vector4::new(500.0, 0.0, 0.0, 0.0), &cfg);
        assert!(out.saturated);
        assert!(out.thrusts.iter().cloned().fold(0.0, f64::max) <= cfg.limits.rotor_max + 1e-9);
        assert!(out.realized[0] > 300.0 && out.realized[0] < 320.0);
        assert!(out.realized.fixed_rows::<3>(1).norm() < 1e-9);

        // Simultaneous large roll and yaw: roll survives, yaw is cut.
        let wrench = Vector4::new(290.0, 6.0, 0.0, 3.0);
        let out = desaturate_rotors(&wrench, &cfg);
        assert!(out.saturated);
        let roll_keep = out.realized[1] / wrench[1];
        let yaw_keep = out.realized[3] / wrench[3];
        assert!(roll_keep > yaw_keep, "roll kept {roll_keep}, yaw kept {yaw_keep}");
        for t in out.thrusts {
            assert!((0.0..=cfg.limits.rotor_max + 1e-9).contains(&t));
        }

        // Feasible input passes through untouched.
        let ok = Vector4::new(160.0, 1.0, -1.0, 0.2);
        let out = desaturate_rotors(&ok, &cfg);
        assert!(!out.saturated);
        assert!((out.realized - ok).norm() < 1e-12);
    }

    #[test]
    fn surface_allocation_examples() {
        let cfg = alloc();
        let out = allocate_surfaces(&Vec3::zeros(), &Vec3::new(20.0, 0.0, 0.0), &cfg);
        assert_eq!((out.aileron, out.ruddervator_l, out.ruddervator_r), (0.0, 0.0, 0.0));

        // Pure pitch: symmetric ruddervator deflection, no aileron, and the
        // round trip through the forward map recovers the torque.
        let v_a = Vec3::new(20.0, 0.0, 0.0);
        let m = Vec3::new(0.0, 1.0, 0.0);
        let out = allocate_surfaces(&m, &v_a, &cfg);
        assert!(out.aileron.abs() < 1e-12);
        assert!((out.ruddervator_l - out.ruddervator_r).abs() < 1e-12);
        let deltas = Vec3::new(out.aileron, out.ruddervator_l, out.ruddervator_r);
        let back = cfg.rho * v_a.norm_squared() * (cfg.surface * deltas);
        assert!((back - m).norm() < 1e-12);

        // Low airspeed with nonzero demand: clamped, no overflow.
        let out = allocate_surfaces(&Vec3::new(0.0, 5.0, 0.0), &Vec3::zeros(), &cfg);
        assert!(out.saturated);
        assert!(out.ruddervator_l.abs() <= cfg.limits.surface_max + 1e-12);
        assert!(out.ruddervator_l.is_finite());
    }

    #[test]
    fn surface_desaturation_prefers_pitch_over_yaw() {
        let cfg = alloc();
        let v_a = Vec3::new(10.0, 0.0, 0.0);
        // Demands that individually fit but jointly exceed the deflection
        // bound: the common-mode (pitch) part survives.
        let m = Vec3::new(0.0, 5.0, 8.0);
        let out = allocate_surfaces(&m, &v_a, &cfg);
        assert!(out.saturated);
        let realized =
            cfg.rho * v_a.norm_squared() * (cfg.surface * Vec3::new(out.aileron, out.ruddervator_l, out.ruddervator_r));
        let pitch_keep = realized.y / m.y;
        let yaw_keep = realized.z / m.z;
        assert!(pitch_keep > 0.99, "pitch kept {pitch_keep}");
        assert!(yaw_keep < pitch_keep);
    }

    #[test]
    fn attitude_kinematic_loop_satisfies_lyapunov_decay() {
        // Closing the loop on the kinematics alone (omega = omega_r): the
        // error-angle Lyapunov function decays at least as fast as
        // exp(-4 min(k) t). RK4 on the frame ODE keeps the discretization
        // error far below the bound's margin.
        let g = gains();
        let lam = g.min_attitude_gain();
        let dt = 0.001;
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for _ in 0..20 {
            let axis = loop {
                let v = Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                if v.norm() > 0.1 {
                    break v.normalize();
                }
            };
            let theta0 = rng.random_range(0.05..3.0);
            let frame_r = BodyFrame::IDENTITY;
            let mut b = frame_r.rotated_by(&axis, theta0);
            let v0 = 0.5 * (theta0 / 2.0).tan().powi(2);
            let mut t = 0.0;
            for _ in 0..1500 {
                // RK4 on db/dt = omega_r(b) x b.
                let deriv = |f: &BodyFrame| {
                    let w = attitude_ctl(f, &frame_r, None, dt, &g);
                    (w.cross(&f.i), w.cross(&f.j), w.cross(&f.k))
                };
                let adv = |f: &BodyFrame, d: &(Vec3, Vec3, Vec3), h: f64| BodyFrame {
                    i: f.i + d.0 * h,
                    j: f.j + d.1 * h,
                    k: f.k + d.2 * h,
                };
                let k1 = deriv(&b);
                let k2 = deriv(&adv(&b, &k1, dt / 2.0));
                let k3 = deriv(&adv(&b, &k2, dt / 2.0));
                let k4 = deriv(&adv(&b, &k3, dt));
                let comb = (
                    (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0) / 6.0,
                    (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1) / 6.0,
                    (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2) / 6.0,
                );
                b = adv(&b, &comb, dt).orthonormalized().unwrap();
                t += dt;
                let theta = rotation_angle_between(&b, &frame_r);
                let v = 0.5 * (theta / 2.0).tan().powi(2);
                assert!(
                    v <= v0 * (-4.0 * lam * t).exp() * (1.0 + 1e-6),
                    "Lyapunov bound violated at t = {t}: V = {v}"
                );
            }
        }
    }

    #[test]
    fn rate_loop_decay_on_rotational_dynamics() {
        // J w_dot = M with M from the reduced rate law (integral action
        // off, matching the pure-P decay property) and no passive torque:
        // each component decays at least at min(k_p).
        let mut g = gains();
        g.k_i_omega = Vec3::zeros();
        let p = VehicleParams::default();
        let dt = 0.0002;
        let mut w = Vec3::new(1.0, -0.8, 0.5);
        let mut integ = RateIntegrator::default();
        let k_min = g.k_p_omega.min();
        let mut t = 0.0;
        let inertia_inv = p.inertia.try_inverse().unwrap();
        let w0 = w.norm();
        for _ in 0..5000 {
            let (m, next) = rate_ctl(&w, &Vec3::zeros(), None, &integ, &p.inertia, &g, dt);
            integ = next;
            w += inertia_inv * m * dt;
            t += dt;
        }
        // The integrator only accelerates convergence here; the P part
        // alone gives the exponential envelope.
        assert!(w.norm() <= w0 * (-k_min * t).exp() * 1.05, "|w| = {} at t = {t}", w.norm());
    }

    #[test]
    fn degenerate_geometry_is_rejected() {
        // A zero torque/thrust ratio makes the yaw row vanish.
        let mut p = VehicleParams::default();
        p.eta = 0.0;
        assert_eq!(
            AllocationConfig::from_params(&p, ActuatorLimits::default()).unwrap_err(),
            AllocationError::SingularMixer
        );
        // All-zero surface derivatives are equally unusable.
        let mut p = VehicleParams::default();
        p.cl_da = 0.0;
        assert_eq!(
            AllocationConfig::from_params(&p, ActuatorLimits::default()).unwrap_err(),
            AllocationError::SingularSurfaceMatrix
        );
    }

    #[test]
    fn mode_transition_consistency_rotors_only_at_lambda_zero() {
        let (mc, fw) = blend_torque(&Vec3::new(1.0, 2.0, 3.0), 0.0);
        assert_eq!(fw, Vec3::zeros());
        assert_eq!(mc, Vec3::new(1.0, 2.0, 3.0));
        let _ = J0; // frame constants exercised elsewhere
    }
}
