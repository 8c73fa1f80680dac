//! Position and speed-vector control loops.
//!
//! The cascade is altitude -> vertical speed and horizontal guidance ->
//! horizontal speed, ending in a single desired acceleration vector. Two
//! horizontal speed modes exist: tracking a velocity vector (hover-style
//! piloting) and regulating heading plus forward speed (wing-borne
//! flight). All integrators use conditional freezing: accumulation stops
//! once the integrator is at its bound and the error keeps pushing
//! outward, and also while the loop output is saturated and the error
//! drives it deeper into saturation.

use crate::geom::{horizontal, sat_norm, sat_scalar, Vec3, K0};
use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum OuterError {
    #[error("horizontal speed {0} m/s too small for heading control")]
    DegenerateHeading(f64),
}

/// Gains and envelopes of the outer loops (SI units).
#[derive(Debug, Clone, PartialEq)]
pub struct OuterGains {
    // Altitude
    pub k_z: f64,
    pub v_z_min: f64,
    pub v_z_max: f64,
    // Horizontal guidance (trajectory tracking)
    pub k_p: f64,
    pub v_h_max: f64,
    // Vertical speed
    pub k_vz: f64,
    pub k_i_vz: f64,
    pub delta_i_vz: f64,
    pub a_z_min: f64,
    pub a_z_max: f64,
    // Horizontal velocity tracking
    pub k_vh: f64,
    pub k_i_vh: f64,
    pub delta_i_vh: f64,
    pub a_h_max: f64,
    // Tangential speed regulation (heading mode)
    pub k_t: f64,
    pub k_i_t: f64,
    pub delta_i_vt: f64,
    pub a_t_min: f64,
    pub a_t_max: f64,
    // Lateral/heading control
    pub k_h: f64,
    pub k_i_h: f64,
    pub delta_i_h: f64,
    pub a_l_max: f64,
    /// Minimum horizontal speed for the heading vector to be usable.
    pub heading_min_speed: f64,
}

impl Default for OuterGains {
    fn default() -> Self {
        OuterGains {
            k_z: 0.25,
            v_z_min: -1.5,
            v_z_max: 1.0,
            k_p: 0.29,
            v_h_max: 5.0,
            k_vz: 3.65,
            k_i_vz: 1.25,
            delta_i_vz: 3.15,
            a_z_min: -5.5,
            a_z_max: 4.5,
            k_vh: 1.5,
            k_i_vh: 0.7,
            delta_i_vh: 2.75,
            a_h_max: 3.35,
            k_t: 2.4,
            k_i_t: 1.1,
            delta_i_vt: 1.3,
            a_t_min: -1.0,
            a_t_max: 5.0,
            k_h: 0.8,
            k_i_h: 0.16,
            delta_i_h: 1.5,
            a_l_max: 5.21,
            heading_min_speed: 1.0,
        }
    }
}

impl OuterGains {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("k_z", self.k_z),
            ("k_p", self.k_p),
            ("k_vz", self.k_vz),
            ("k_vh", self.k_vh),
            ("k_t", self.k_t),
            ("k_h", self.k_h),
            ("v_h_max", self.v_h_max),
            ("a_h_max", self.a_h_max),
            ("a_l_max", self.a_l_max),
            ("heading_min_speed", self.heading_min_speed),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(format!("{name} must be positive"));
            }
        }
        for (name, v) in [
            ("k_i_vz", self.k_i_vz),
            ("k_i_vh", self.k_i_vh),
            ("k_i_t", self.k_i_t),
            ("k_i_h", self.k_i_h),
            ("delta_i_vz", self.delta_i_vz),
            ("delta_i_vh", self.delta_i_vh),
            ("delta_i_vt", self.delta_i_vt),
            ("delta_i_h", self.delta_i_h),
        ] {
            if v < 0.0 {
                return Err(format!("{name} must be non-negative"));
            }
        }
        if self.v_z_min >= self.v_z_max {
            return Err("v_z_min must be below v_z_max".into());
        }
        if self.a_z_min >= self.a_z_max {
            return Err("a_z_min must be below a_z_max".into());
        }
        if self.a_t_min >= self.a_t_max {
            return Err("a_t_min must be below a_t_max".into());
        }
        Ok(())
    }
}

/// Integral states of the outer loops, owned by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OuterIntegrators {
    /// Vertical speed integrator, m/s^2.
    pub i_vz: f64,
    /// Horizontal velocity integrator (horizontal vector), m/s^2.
    pub i_vh: Vec3,
    /// Tangential speed integrator, m/s^2.
    pub i_vt: f64,
    /// Heading integrator (angular velocity of the heading), rad/s.
    pub i_h: Vec3,
}

/// Altitude loop: desired vertical speed from the altitude error
/// (saturated proportional control with feedforward).
pub fn altitude_ctl(z: f64, z_r: f64, z_r_dot: f64, g: &OuterGains) -> f64 {
    sat_scalar(-g.k_z * (z - z_r) + z_r_dot, g.v_z_min, g.v_z_max)
}

/// Horizontal guidance for trajectory tracking: desired horizontal
/// velocity from the horizontal position error.
pub fn guidance_tt(r_hor: &Vec3, r_hor_r: &Vec3, r_hor_r_dot: &Vec3, g: &OuterGains) -> Vec3 {
    sat_norm(&(-g.k_p * (r_hor - r_hor_r) + r_hor_r_dot), g.v_h_max)
}

fn advance_scalar_integrator(
    i: f64,
    err: f64,
    gain: f64,
    delta: f64,
    raw_out: f64,
    out_lo: f64,
    out_hi: f64,
    dt: f64,
) -> f64 {
    let freeze_delta = i.abs() >= delta && i * err > 0.0;
    // Output-saturation anti-windup: integration is also frozen while the
    // raw output exceeds a bound and integrating would push it further out
    // (the integrator enters the output negated).
    let freeze_sat = (raw_out > out_hi && err < 0.0) || (raw_out < out_lo && err > 0.0);
    if freeze_delta || freeze_sat {
        i
    } else {
        sat_scalar(i + gain * err * dt, -delta, delta)
    }
}

fn advance_vector_integrator(
    i: &Vec3,
    err: &Vec3,
    gain: f64,
    delta: f64,
    raw_out: &Vec3,
    out_max: f64,
    dt: f64,
) -> Vec3 {
    let freeze_delta = i.norm() >= delta && i.dot(err) > 0.0;
    let freeze_sat = raw_out.norm() > out_max && raw_out.dot(err) < 0.0;
    if freeze_delta || freeze_sat {
        *i
    } else {
        sat_norm(&(i + gain * err * dt), delta)
    }
}

/// Vertical speed loop (PI with conditional freeze): returns the desired
/// vertical acceleration and the advanced integrator value.
pub fn vertical_speed_ctl(
    v_z: f64,
    v_z_r: f64,
    v_z_r_dot: f64,
    integ: &OuterIntegrators,
    g: &OuterGains,
    dt: f64,
) -> (f64, f64) {
    let err = v_z - v_z_r;
    let raw = -g.k_vz * err - integ.i_vz + v_z_r_dot;
    let a_z_r = sat_scalar(raw, g.a_z_min, g.a_z_max);
    let i_next = advance_scalar_integrator(
        integ.i_vz, err, g.k_i_vz, g.delta_i_vz, raw, g.a_z_min, g.a_z_max, dt,
    );
    (a_z_r, i_next)
}

/// Horizontal velocity loop (vector PI with conditional freeze): returns
/// the desired horizontal acceleration and the advanced integrator.
pub fn horizontal_velocity_ctl(
    v_hor: &Vec3,
    v_hor_r: &Vec3,
    v_hor_r_dot: &Vec3,
    integ: &OuterIntegrators,
    g: &OuterGains,
    dt: f64,
) -> (Vec3, Vec3) {
    let err = v_hor - v_hor_r;
    let raw = -g.k_vh * err - integ.i_vh + v_hor_r_dot;
    let a_hor_r = sat_norm(&raw, g.a_h_max);
    let i_next =
        advance_vector_integrator(&integ.i_vh, &err, g.k_i_vh, g.delta_i_vh, &raw, g.a_h_max, dt);
    (a_hor_r, i_next)
}

/// Result of the heading-and-speed controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadingSpeedOutput {
    pub a_hor_r: Vec3,
    pub i_vt: f64,
    pub i_h: Vec3,
}

/// Heading tracking and speed regulation: splits the desired horizontal
/// acceleration into a tangential PI term along the current heading and a
/// geometric lateral PI term orthogonal to it.
///
/// `v` is the inertial velocity, `v_a` the estimated air velocity (used
/// when the setpoint is airspeed-referenced). Fails when the horizontal
/// speed is too small for the heading to be defined.
pub fn speed_heading_ctl(
    v: &Vec3,
    v_a: &Vec3,
    h_r: &Vec3,
    h_r_dot: &Vec3,
    v_h_r: f64,
    v_h_r_dot: f64,
    airspeed_referenced: bool,
    integ: &OuterIntegrators,
    g: &OuterGains,
    dt: f64,
) -> Result<HeadingSpeedOutput, OuterError> {
    let v_hor = horizontal(v);
    let speed_hor = v_hor.norm();
    if speed_hor < g.heading_min_speed {
        return Err(OuterError::DegenerateHeading(speed_hor));
    }
    let h = v_hor / speed_hor;

    // Tangential: regulate airspeed (or ground speed) along the heading.
    let e_v = if airspeed_referenced { v_a.norm() - v_h_r } else { speed_hor - v_h_r };
    let raw_tan = -g.k_t * e_v - integ.i_vt + v_h_r_dot;
    let a_tan_r = sat_scalar(raw_tan, g.a_t_min, g.a_t_max) * h;
    let i_vt = advance_scalar_integrator(
        integ.i_vt, e_v, g.k_i_t, g.delta_i_vt, raw_tan, g.a_t_min, g.a_t_max, dt,
    );

    // Lateral: geometric PI on the heading direction.
    let err_h = h.cross(h_r);
    let omega_h_r = g.k_h * err_h + integ.i_h + h_r.cross(h_r_dot);
    let raw_lat = speed_hor * omega_h_r.cross(&h);
    let a_lat_r = sat_norm(&raw_lat, g.a_l_max);

    let freeze_delta = integ.i_h.norm() >= g.delta_i_h && integ.i_h.dot(&err_h) > 0.0;
    // Integrating changes the lateral output by speed * (k_i err_h) x h;
    // freeze when that pushes a saturated output further out.
    let push = speed_hor * (g.k_i_h * err_h).cross(&h);
    let freeze_sat = raw_lat.norm() > g.a_l_max && push.dot(&raw_lat) > 0.0;
    let i_h = if freeze_delta || freeze_sat {
        integ.i_h
    } else {
        sat_norm(&(integ.i_h + g.k_i_h * err_h * dt), g.delta_i_h)
    };

    Ok(HeadingSpeedOutput { a_hor_r: a_tan_r + a_lat_r, i_vt, i_h })
}

/// Assembles the vertical and horizontal desired accelerations into one
/// reference acceleration vector.
pub fn assemble_acceleration(a_z_r: f64, a_hor_r: &Vec3) -> Vec3 {
    debug_assert!(a_hor_r.z.abs() < 1e-9, "horizontal acceleration must be horizontal");
    a_z_r * K0 + a_hor_r
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gains() -> OuterGains {
        OuterGains::default()
    }

    #[test]
    fn default_gains_valid() {
        gains().validate().unwrap();
    }

    #[test]
    fn altitude_examples() {
        let g = gains();
        assert_eq!(altitude_ctl(10.0, 10.0, 0.0, &g), 0.0);
        // 2 m above the reference (NED: z error +2) commands -0.5 m/s.
        assert!((altitude_ctl(-28.0, -30.0, 0.0, &g) + 0.5).abs() < 1e-12);
        // 20 m below commands +5, clamped at v_z_max = 1.
        assert_eq!(altitude_ctl(-10.0, 10.0, 0.0, &g), 1.0);
    }

    #[test]
    fn guidance_examples() {
        let g = gains();
        let zero = Vec3::zeros();
        assert_eq!(guidance_tt(&zero, &zero, &zero, &g), Vec3::zeros());
        let v = guidance_tt(&Vec3::new(10.0, 0.0, 0.0), &zero, &zero, &g);
        assert!((v - Vec3::new(-2.9, 0.0, 0.0)).norm() < 1e-12);
        let v = guidance_tt(&Vec3::new(-100.0, 0.0, 0.0), &zero, &zero, &g);
        assert!((v - Vec3::new(5.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn vertical_speed_examples() {
        let g = gains();
        let integ = OuterIntegrators::default();
        let (a, i) = vertical_speed_ctl(0.0, 0.0, 0.0, &integ, &g, 0.02);
        assert_eq!((a, i), (0.0, 0.0));

        let (a, i) = vertical_speed_ctl(1.0, 0.0, 0.0, &integ, &g, 0.02);
        assert!((a + 3.65).abs() < 1e-12);
        assert!((i - 1.25 * 0.02).abs() < 1e-12);

        // Frozen at the bound when the error pushes outward.
        let mut at_bound = OuterIntegrators::default();
        at_bound.i_vz = g.delta_i_vz;
        let (_, i) = vertical_speed_ctl(1.0, 0.0, 0.0, &at_bound, &g, 0.02);
        assert_eq!(i, g.delta_i_vz);
        // ...but unwinds when the error reverses.
        let (_, i) = vertical_speed_ctl(-1.0, 0.0, 0.0, &at_bound, &g, 0.02);
        assert!(i < g.delta_i_vz);
    }

    #[test]
    fn vertical_speed_output_saturation_freeze() {
        let g = gains();
        // Large negative error: raw output far above a_z_max, integrating
        // (negative err) would push it further; integrator must freeze.
        let integ = OuterIntegrators::default();
        let (a, i) = vertical_speed_ctl(-10.0, 0.0, 0.0, &integ, &g, 0.02);
        assert_eq!(a, g.a_z_max);
        assert_eq!(i, 0.0);
    }

    #[test]
    fn horizontal_velocity_examples() {
        let g = gains();
        let integ = OuterIntegrators::default();
        let zero = Vec3::zeros();
        let (a, _) = horizontal_velocity_ctl(&zero, &zero, &zero, &integ, &g, 0.02);
        assert_eq!(a, Vec3::zeros());

        let (a, _) =
            horizontal_velocity_ctl(&Vec3::new(2.0, 0.0, 0.0), &zero, &zero, &integ, &g, 0.02);
        assert!((a - Vec3::new(-3.0, 0.0, 0.0)).norm() < 1e-12);
        assert!(a.norm() < g.a_h_max);

        let (a, _) =
            horizontal_velocity_ctl(&Vec3::new(4.0, 0.0, 0.0), &zero, &zero, &integ, &g, 0.02);
        assert!((a.norm() - g.a_h_max).abs() < 1e-12);
    }

    #[test]
    fn speed_heading_examples() {
        let g = gains();
        let integ = OuterIntegrators::default();
        let h_r = Vec3::new(1.0, 0.0, 0.0);
        let zero = Vec3::zeros();

        // On heading, on speed: no acceleration.
        let v = Vec3::new(10.0, 0.0, 0.0);
        let out =
            speed_heading_ctl(&v, &v, &h_r, &zero, 10.0, 0.0, true, &integ, &g, 0.02).unwrap();
        assert!(out.a_hor_r.norm() < 1e-12);

        // 2 m/s too slow: tangential 4.8 m/s^2 along the heading.
        let v = Vec3::new(8.0, 0.0, 0.0);
        let out =
            speed_heading_ctl(&v, &v, &h_r, &zero, 10.0, 0.0, true, &integ, &g, 0.02).unwrap();
        assert!((out.a_hor_r - Vec3::new(4.8, 0.0, 0.0)).norm() < 1e-12);

        // Heading orthogonal to the reference at 10 m/s: lateral clamped
        // at a_l_max = 5.21.
        let v = Vec3::new(0.0, 10.0, 0.0);
        let out =
            speed_heading_ctl(&v, &v, &h_r, &zero, 10.0, 0.0, false, &integ, &g, 0.02).unwrap();
        let lateral = out.a_hor_r - out.a_hor_r.dot(&Vec3::new(0.0, 1.0, 0.0)) * Vec3::new(0.0, 1.0, 0.0);
        assert!((lateral.norm() - g.a_l_max).abs() < 1e-9);

        // Below the minimum speed the heading is undefined.
        let slow = Vec3::new(0.5, 0.0, 0.0);
        assert!(matches!(
            speed_heading_ctl(&slow, &slow, &h_r, &zero, 10.0, 0.0, false, &integ, &g, 0.02),
            Err(OuterError::DegenerateHeading(_))
        ));
    }

    #[test]
    fn lateral_term_is_orthogonal_to_heading() {
        let g = gains();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let integ = OuterIntegrators::default();
        for _ in 0..200 {
            let v = Vec3::new(rng.random_range(-15.0..15.0), rng.random_range(-15.0..15.0), rng.random_range(-3.0..3.0));
            if horizontal(&v).norm() < g.heading_min_speed {
                continue;
            }
            let ang: f64 = rng.random_range(-3.0..3.0);
            let h_r = Vec3::new(ang.cos(), ang.sin(), 0.0);
            let out = speed_heading_ctl(&v, &v, &h_r, &Vec3::zeros(), 10.0, 0.0, false, &integ, &g, 0.02)
                .unwrap();
            let h = horizontal(&v).normalize();
            // Splitting off the tangential part leaves a lateral component
            // orthogonal to h.
            let lat = out.a_hor_r - out.a_hor_r.dot(&h) * h;
            assert!(lat.dot(&h).abs() < 1e-12);
        }
    }

    #[test]
    fn integrators_stay_bounded_under_arbitrary_inputs() {
        let g = gains();
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let mut integ = OuterIntegrators::default();
        for _ in 0..5000 {
            let v_z = rng.random_range(-8.0..8.0);
            let (_, i_vz) = vertical_speed_ctl(v_z, rng.random_range(-2.0..2.0), 0.0, &integ, &g, 0.02);
            let v_hor = Vec3::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), 0.0);
            let v_ref = Vec3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), 0.0);
            let (_, i_vh) = horizontal_velocity_ctl(&v_hor, &v_ref, &Vec3::zeros(), &integ, &g, 0.02);
            integ.i_vz = i_vz;
            integ.i_vh = i_vh;

            let v = Vec3::new(rng.random_range(2.0..20.0), rng.random_range(-5.0..5.0), 0.0);
            let ang: f64 = rng.random_range(-3.0..3.0);
            let h_r = Vec3::new(ang.cos(), ang.sin(), 0.0);
            let out = speed_heading_ctl(
                &v,
                &v,
                &h_r,
                &Vec3::zeros(),
                rng.random_range(0.0..25.0),
                0.0,
                true,
                &integ,
                &g,
                0.02,
            )
            .unwrap();
            integ.i_vt = out.i_vt;
            integ.i_h = out.i_h;

            assert!(integ.i_vz.abs() <= g.delta_i_vz + 1e-12);
            assert!(integ.i_vh.norm() <= g.delta_i_vh + 1e-12);
            assert!(integ.i_vt.abs() <= g.delta_i_vt + 1e-12);
            assert!(integ.i_h.norm() <= g.delta_i_h + 1e-12);
        }
    }

    #[test]
    fn vertical_chain_eigenvalues_are_negative() {
        // Linearized altitude + vertical-speed chain on an ideal
        // double-integrator plant, state (z, v_z, I_vz):
        //   z'   = v_z
        //   v_z' = -k_vz k_z z - k_vz v_z - I
        //   I'   = k_i_vz k_z z + k_i_vz v_z
        let g = gains();
        let a = nalgebra::Matrix3::new(
            0.0,
            1.0,
            0.0,
            -g.k_vz * g.k_z,
            -g.k_vz,
            -1.0,
            g.k_i_vz * g.k_z,
            g.k_i_vz,
            0.0,
        );
        for eig in a.complex_eigenvalues().iter() {
            assert!(eig.re < 0.0, "unstable chain eigenvalue {eig}");
        }
    }

    #[test]
    fn vertical_chain_is_exponentially_stable_on_ideal_plant() {
        // Double integrator with v_dot = a_r: the altitude + vertical speed
        // chain must drive the altitude error to zero without overshooting
        // into instability (all closed-loop eigenvalues negative for the
        // default gains; checked here by simulation from a small offset).
        let g = gains();
        let dt = 0.02;
        let mut z = 1.0; // 1 m offset, stays inside every saturation
        let mut v_z = 0.0;
        let mut integ = OuterIntegrators::default();
        let mut last = f64::INFINITY;
        for step in 0..3000 {
            let v_z_r = altitude_ctl(z, 0.0, 0.0, &g);
            let (a_z, i_vz) = vertical_speed_ctl(v_z, v_z_r, 0.0, &integ, &g, dt);
            integ.i_vz = i_vz;
            v_z += a_z * dt;
            z += v_z * dt;
            if step % 500 == 499 {
                let m = z.abs().max(v_z.abs());
                assert!(m < last, "not contracting at step {step}: {m} vs {last}");
                last = m;
            }
        }
        assert!(z.abs() < 1e-3);
    }

    #[test]
    fn assemble_examples() {
        assert_eq!(assemble_acceleration(0.0, &Vec3::zeros()), Vec3::zeros());
        let a = assemble_acceleration(-2.0, &Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(a, Vec3::new(1.0, 0.0, -2.0));

        let g = gains();
        let bound = (g.a_h_max.powi(2) + g.a_z_min.powi(2).max(g.a_z_max.powi(2))).sqrt();
        let extreme = assemble_acceleration(g.a_z_min, &Vec3::new(g.a_h_max, 0.0, 0.0));
        assert!(extreme.norm() <= bound + 1e-12);
    }
}
