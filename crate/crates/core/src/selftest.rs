//! Quick self-contained property checks, runnable from the CLI. Each
//! check is a reduced version of the corresponding test-suite property,
//! sized to finish in well under a second.

use crate::geom::{
    frame_error_vector, project_orthogonal, sat_norm, BodyFrame, Vec3, J0,
};
use crate::inner::{blend_torque, AllocationConfig};
use crate::outer::{vertical_speed_ctl, OuterGains, OuterIntegrators};
use crate::plant::{pwm_decode, pwm_encode, ActuatorCommand, ActuatorLimits, PwmCalibration, VehicleParams};
use crate::solver::{
    force_balance_residual, solve, LateralMode, SolverInput, SolverModel, SolverState, ThrustMode,
};
use nalgebra::{Matrix3, Matrix4, Vector4};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        if v.norm() > 0.1 {
            return v.normalize();
        }
    }
}

fn check(name: &'static str, f: impl FnOnce() -> Result<String, String>) -> CheckResult {
    match f() {
        Ok(detail) => CheckResult { name, passed: true, detail },
        Err(detail) => CheckResult { name, passed: false, detail },
    }
}

/// Runs every property suite and returns one result per suite.
pub fn run_all() -> Vec<CheckResult> {
    vec![
        check("geometry identities", || {
            let mut rng = ChaCha8Rng::seed_from_u64(101);
            let mut worst: f64 = 0.0;
            for _ in 0..500 {
                let u = random_unit(&mut rng);
                let theta = rng.random_range(1e-3..3.1);
                let b = BodyFrame::IDENTITY;
                let br = b.rotated_by(&u, theta);
                worst = worst.max((frame_error_vector(&b, &br) - u * (2.0 * theta.sin())).norm());
                let v = random_unit(&mut rng) * rng.random_range(0.0..10.0);
                worst = worst.max(project_orthogonal(&u, &v).dot(&u).abs());
                let s = sat_norm(&v, 2.0);
                worst = worst.max((s.norm() - v.norm().min(2.0)).abs());
            }
            if worst < 1e-10 {
                Ok(format!("max identity error {worst:.2e}"))
            } else {
                Err(format!("identity error {worst:.2e} exceeds 1e-10"))
            }
        }),
        check("setpoint-solver force balance", || {
            let model = SolverModel::from_params(&VehicleParams::default());
            let mut rng = ChaCha8Rng::seed_from_u64(102);
            let mut worst: f64 = 0.0;
            let mut n = 0;
            while n < 1000 {
                let ang: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let a_h = rng.random_range(0.0..3.35);
                let input = SolverInput {
                    accel_r: Vec3::new(a_h * ang.cos(), a_h * ang.sin(), rng.random_range(-5.5..4.5)),
                    v_a: random_unit(&mut rng) * rng.random_range(0.0..25.0),
                    thrust: if rng.random_bool(0.5) {
                        ThrustMode::ImposedThrustDir(rng.random_range(-1.57..0.0))
                    } else {
                        ThrustMode::ImposedPitch(rng.random_range(-0.2..0.3))
                    },
                    lateral: if rng.random_bool(0.5) {
                        LateralMode::Yaw(rng.random_range(-3.0..3.0))
                    } else {
                        LateralMode::Balanced
                    },
                };
                let mut st = SolverState::default();
                let Ok(out) = solve(&input, &model, &mut st, &J0) else { continue };
                if out.thrust_clamped {
                    continue;
                }
                let scale = (input.accel_r - model.g0 * crate::geom::K0).norm().max(1.0);
                worst = worst.max(force_balance_residual(&input, &model, &out) / scale);
                n += 1;
            }
            if worst <= 1e-9 {
                Ok(format!("max relative residual {worst:.2e}"))
            } else {
                Err(format!("residual {worst:.2e} exceeds 1e-9"))
            }
        }),
        check("allocation round trips", || {
            let p = VehicleParams::default();
            let a = p.mixer_matrix();
            let b = p.surface_matrix();
            let ea = (a * a.try_inverse().unwrap() - Matrix4::identity()).norm();
            let eb = (b * b.try_inverse().unwrap() - Matrix3::identity()).norm();
            let cfg = AllocationConfig::from_params(&p, ActuatorLimits::default()).unwrap();
            let out = crate::inner::allocate_rotors(160.0, &Vec3::new(1.0, -2.0, 0.2), &cfg);
            let w = cfg.mixer * Vector4::from_column_slice(&out.thrusts);
            let er = (w - Vector4::new(160.0, 1.0, -2.0, 0.2)).norm();
            if ea < 1e-12 && eb < 1e-12 && er < 1e-12 {
                Ok(format!("A: {ea:.2e}, B: {eb:.2e}, alloc: {er:.2e}"))
            } else {
                Err(format!("A: {ea:.2e}, B: {eb:.2e}, alloc: {er:.2e}"))
            }
        }),
        check("torque blend split", || {
            let mut rng = ChaCha8Rng::seed_from_u64(103);
            let mut worst: f64 = 0.0;
            for _ in 0..500 {
                let m = random_unit(&mut rng) * rng.random_range(0.0..10.0);
                let (mc, fw) = blend_torque(&m, rng.random_range(0.0..1.0));
                for axis in 0..3 {
                    let tol = f64::EPSILON * m[axis].abs();
                    let err = (mc[axis] + fw[axis] - m[axis]).abs();
                    worst = worst.max(if tol > 0.0 { err / tol } else { err });
                }
            }
            if worst <= 1.0 {
                Ok(format!("max leakage {worst:.2} ulp"))
            } else {
                Err(format!("leakage {worst:.2} ulp exceeds 1 ulp"))
            }
        }),
        check("integrator freeze bounds", || {
            let g = OuterGains::default();
            let mut integ = OuterIntegrators::default();
            let mut rng = ChaCha8Rng::seed_from_u64(104);
            for _ in 0..2000 {
                let (_, i) = vertical_speed_ctl(
                    rng.random_range(-8.0..8.0),
                    rng.random_range(-2.0..2.0),
                    0.0,
                    &integ,
                    &g,
                    0.02,
                );
                integ.i_vz = i;
                if integ.i_vz.abs() > g.delta_i_vz + 1e-12 {
                    return Err(format!("integrator escaped bound: {}", integ.i_vz));
                }
            }
            Ok(format!("bounded at {:.2} over 2000 arbitrary steps", g.delta_i_vz))
        }),
        check("pwm round trip", || {
            let lim = ActuatorLimits::default();
            let cal = PwmCalibration::from_limits(&lim);
            let mut rng = ChaCha8Rng::seed_from_u64(105);
            let mut worst: f64 = 0.0;
            for _ in 0..500 {
                let cmd = ActuatorCommand {
                    rotors: [
                        rng.random_range(0.0..lim.rotor_max),
                        rng.random_range(0.0..lim.rotor_max),
                        rng.random_range(0.0..lim.rotor_max),
                        rng.random_range(0.0..lim.rotor_max),
                    ],
                    pusher: rng.random_range(0.0..lim.pusher_max),
                    aileron: rng.random_range(-lim.surface_max..lim.surface_max),
                    ruddervator_l: rng.random_range(-lim.surface_max..lim.surface_max),
                    ruddervator_r: rng.random_range(-lim.surface_max..lim.surface_max),
                };
                let back = pwm_decode(&pwm_encode(&cmd, &cal), &cal).unwrap();
                worst = worst.max((back.rotors[0] - cmd.rotors[0]).abs() / (lim.rotor_max / 1000.0));
            }
            if worst <= 1.0 {
                Ok(format!("max quantization {worst:.2} of one count"))
            } else {
                Err(format!("quantization error {worst:.2} counts"))
            }
        }),
        check("attitude Lyapunov decrease", || {
            let g = crate::inner::InnerGains::default();
            let lam = g.min_attitude_gain();
            let mut rng = ChaCha8Rng::seed_from_u64(106);
            for _ in 0..10 {
                let axis = random_unit(&mut rng);
                let theta0 = rng.random_range(0.1..2.8);
                let frame_r = BodyFrame::IDENTITY;
                let mut b = frame_r.rotated_by(&axis, theta0);
                let v0 = 0.5 * (theta0 / 2.0).tan().powi(2);
                let dt = 0.001;
                let mut t = 0.0;
                for _ in 0..1000 {
                    let w = crate::inner::attitude_ctl(&b, &frame_r, None, dt, &g);
                    b = BodyFrame {
                        i: b.i + w.cross(&b.i) * dt,
                        j: b.j + w.cross(&b.j) * dt,
                        k: b.k + w.cross(&b.k) * dt,
                    }
                    .orthonormalized()
                    .unwrap();
                    t += dt;
                }
                let theta = crate::geom::rotation_angle_between(&b, &frame_r);
                let v = 0.5 * (theta / 2.0).tan().powi(2);
                // Euler integration here, so allow slack above the exact
                // exponential bound (the test suite holds the tight one).
                if v > v0 * (-4.0 * lam * t).exp() * 1.02 {
                    return Err(format!("V(t)/bound = {:.4}", v / (v0 * (-4.0 * lam * t).exp())));
                }
            }
            Ok("exponential decrease over 10 random initial errors".into())
        }),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_selftests_pass() {
        for r in run_all() {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }
}
