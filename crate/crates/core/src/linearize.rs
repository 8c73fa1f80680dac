//! Local stability analysis of the closed loop: finds a trim of the
//! plant-plus-controller map at a requested airspeed (with the phase
//! schedule's mode for that speed), linearizes the one-outer-period map
//! by central finite differences, and returns the continuous-equivalent
//! eigenvalues.
//!
//! Trims are computed in still air with sensor noise off. The state
//! vector covers every fed-back coordinate: altitude (and full position
//! in hover), velocity, attitude deviation in exponential coordinates,
//! body rate, the active loop integrators and the actuator lag states.
//! Coordinates without feedback in a given mode (horizontal position in
//! cruise, the idle integrators) are excluded so neutral directions do
//! not masquerade as instability.

use crate::controller::{ControllerConfig, FlightController, SensorData};
use crate::fsm::{
    HorizontalObjective, LateralObjective, PhaseSetpoints, ThrustObjective, VerticalObjective,
};
use crate::geom::{frame_error_vector, BodyFrame, Vec3};
use crate::plant::{
    actuator_step, plant_step, ActuatorState, Environment, VehicleState,
};
use crate::scenario::Scenario;
use nalgebra::{Complex, DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinearizeError {
    #[error("trim search did not converge at {airspeed} m/s: residual {residual:.3e}")]
    TrimNotFound { airspeed: f64, residual: f64 },
    #[error("controller setup failed: {0}")]
    Controller(#[from] crate::inner::AllocationError),
    #[error("plant failed during trim: {0}")]
    Plant(#[from] crate::plant::PlantError),
    #[error("eigenvalue computation failed")]
    Eigen,
}

/// Result of one linearization.
#[derive(Debug, Clone)]
pub struct LinearizationResult {
    pub airspeed: f64,
    /// Continuous-equivalent eigenvalues `ln(mu)/T` of the one-period map.
    pub eigenvalues: Vec<Complex<f64>>,
    pub max_real_part: f64,
    /// Largest real part over the dynamical modes, excluding verified
    /// trim-manifold kernel directions.
    pub max_dynamical_real_part: f64,
    /// Number of numerically neutral eigenvalues (trim-manifold kernel).
    ///
    /// Heading-mode trims carry exactly one such direction: with only a
    /// pitot for air data, sideslip is unobservable, so a steady sideslip
    /// held by rate-integrator torque offsets (balanced by the airframe's
    /// weathervane moments, with the heading integrator closing the
    /// lateral force balance) re-trims the aircraft without any error
    /// signal changing. The closed loop therefore has a one-parameter
    /// family of equivalent trims, not an instability.
    pub kernel_dim: usize,
    /// Whether perturbing the trim along each kernel direction was
    /// confirmed to land on another fixed point (second-order residual).
    pub kernel_verified: bool,
    pub trim_residual: f64,
    pub dim: usize,
    /// Jacobian of the one-period map at the trim.
    pub jacobian: Option<DMatrix<f64>>,
}

/// Phase-equivalent control configuration for a trim airspeed, following
/// the transition schedule: hover below 0.5 m/s, rotor-borne balanced
/// flight below the intermediate airspeed, surface-borne pitch-imposed
/// flight up to cruise, and the pure fixed-wing mode from cruise speed.
pub fn schedule_for_airspeed(airspeed: f64, s: &Scenario, z_hold: f64) -> PhaseSetpoints {
    let f = &s.fsm;
    let heading = Vec3::new(1.0, 0.0, 0.0);
    let heading_speed = |v: f64| HorizontalObjective::HeadingSpeed {
        h_r: heading,
        h_r_dot: Vec3::zeros(),
        v_r: v,
        v_r_dot: 0.0,
        airspeed_referenced: true,
    };
    if airspeed < 0.5 {
        PhaseSetpoints {
            thrust: ThrustObjective::ThrustDir(-std::f64::consts::FRAC_PI_2),
            lambda: 0.0,
            vertical: VerticalObjective::AltitudeHold { z_r: z_hold },
            horizontal: HorizontalObjective::PositionHold { r_hor_r: Vec3::zeros() },
            lateral: LateralObjective::Yaw(0.0),
            aero_compensation: false,
        }
    } else if airspeed < f.v_a_t1 {
        PhaseSetpoints {
            thrust: ThrustObjective::Pitch(f.theta_t1),
            lambda: 0.0,
            vertical: VerticalObjective::AltitudeHold { z_r: z_hold },
            horizontal: heading_speed(airspeed),
            lateral: LateralObjective::Balanced,
            aero_compensation: true,
        }
    } else if airspeed < f.v_a_fw {
        PhaseSetpoints {
            thrust: ThrustObjective::Pitch(f.theta_t3),
            lambda: 1.0,
            vertical: VerticalObjective::AltitudeHold { z_r: z_hold },
            horizontal: heading_speed(airspeed),
            lateral: LateralObjective::Balanced,
            aero_compensation: true,
        }
    } else {
        PhaseSetpoints {
            thrust: ThrustObjective::ThrustDir(0.0),
            lambda: 1.0,
            vertical: VerticalObjective::AltitudeHold { z_r: z_hold },
            horizontal: heading_speed(airspeed),
            lateral: LateralObjective::Balanced,
            aero_compensation: true,
        }
    }
}

const Z_HOLD: f64 = -30.0;

/// Closed-loop world with a frozen phase mode, stepped one outer period
/// at a time.
struct World {
    scenario: Scenario,
    setpoints: PhaseSetpoints,
    ctl_cfg: ControllerConfig,
    hover_mode: bool,
}

/// Full simulation state carried through one period.
#[derive(Clone)]
struct WorldState {
    plant: VehicleState,
    actuators: ActuatorState,
    i_vz: f64,
    i_vh: Vec3,
    i_vt: f64,
    i_h_z: f64,
    i_omega: Vec3,
}

impl World {
    fn new(scenario: &Scenario, airspeed: f64) -> Self {
        let mut s = scenario.clone();
        // Trims are computed in still air with clean sensors; the attitude
        // feedforward is disabled so the one-period map carries no hidden
        // reference-frame memory.
        s.environment.wind = Vec3::zeros();
        s.environment.pitot_noise_sigma = 0.0;
        s.environment.gust_intensity = 0.0;
        let mut inner = s.inner.clone();
        inner.feedforward = false;
        s.inner = inner.clone();
        let ctl_cfg = ControllerConfig {
            model: s.controller_model.clone(),
            outer: s.outer.clone(),
            inner,
            fsm: s.fsm.clone(),
            limits: s.limits,
            dt_inner: s.dt_ctl,
            outer_divisor: 5,
            airdata_epsilon: 1e-3,
        };
        let setpoints = schedule_for_airspeed(airspeed, &s, Z_HOLD);
        World { scenario: s, setpoints, ctl_cfg, hover_mode: airspeed < 0.5 }
    }

    fn dt_outer(&self) -> f64 {
        self.scenario.dt_ctl * 5.0
    }

    /// Advances plant + controller by one outer period.
    fn step_period(&self, ws: &mut WorldState) -> Result<(), LinearizeError> {
        let mut ctl = FlightController::new(self.ctl_cfg.clone(), &SensorData::from_state(&ws.plant, 0.0))?;
        ctl.outer_integrators.i_vz = ws.i_vz;
        ctl.outer_integrators.i_vh = ws.i_vh;
        ctl.outer_integrators.i_vt = ws.i_vt;
        ctl.outer_integrators.i_h = Vec3::new(0.0, 0.0, ws.i_h_z);
        ctl.rate_integrator.torque = ws.i_omega;

        let env = Environment::default();
        let n_sub = (self.scenario.dt_ctl / self.scenario.dt_plant).round() as usize;
        for _ in 0..5 {
            let v_a = ws.plant.velocity; // still air
            let pitot = v_a.dot(&ws.plant.attitude.i);
            let sensors = SensorData::from_state(&ws.plant, pitot);
            let out = ctl.step_with_setpoints(&sensors, &self.setpoints);
            for _ in 0..n_sub {
                ws.actuators = actuator_step(&out.command, &ws.actuators, self.scenario.dt_plant);
                ws.plant = plant_step(
                    &ws.plant,
                    &ws.actuators,
                    &env,
                    &self.scenario.plant,
                    self.scenario.dt_plant,
                )?;
            }
        }
        ws.i_vz = ctl.outer_integrators.i_vz;
        ws.i_vh = ctl.outer_integrators.i_vh;
        ws.i_vt = ctl.outer_integrators.i_vt;
        ws.i_h_z = ctl.outer_integrators.i_h.z;
        ws.i_omega = ctl.rate_integrator.torque;
        Ok(())
    }

    fn dim(&self) -> usize {
        if self.hover_mode {
            3 + 3 + 3 + 3 + 1 + 2 + 3 + 8
        } else {
            1 + 3 + 3 + 3 + 1 + 1 + 1 + 3 + 8
        }
    }

    fn pack(&self, ws: &WorldState, reference_att: &BodyFrame) -> DVector<f64> {
        let mut x = Vec::with_capacity(self.dim());
        if self.hover_mode {
            x.extend_from_slice(ws.plant.position.as_slice());
        } else {
            x.push(ws.plant.position.z);
        }
        x.extend_from_slice(ws.plant.velocity.as_slice());
        // Attitude deviation: frame_error_vector(ref, att)/2 equals the
        // rotation vector to first order.
        let xi = frame_error_vector(reference_att, &ws.plant.attitude) / 2.0;
        x.extend_from_slice(xi.as_slice());
        x.extend_from_slice(ws.plant.angular_rate.as_slice());
        x.push(ws.i_vz);
        if self.hover_mode {
            x.push(ws.i_vh.x);
            x.push(ws.i_vh.y);
        } else {
            x.push(ws.i_vt);
            x.push(ws.i_h_z);
        }
        x.extend_from_slice(ws.i_omega.as_slice());
        x.extend_from_slice(&ws.actuators.realized.rotors);
        x.push(ws.actuators.realized.pusher);
        x.push(ws.actuators.realized.aileron);
        x.push(ws.actuators.realized.ruddervator_l);
        x.push(ws.actuators.realized.ruddervator_r);
        DVector::from_vec(x)
    }

    fn unpack(&self, x: &DVector<f64>, template: &WorldState, reference_att: &BodyFrame) -> WorldState {
        let mut ws = template.clone();
        let mut i = 0;
        let mut take = || {
            let v = x[i];
            i += 1;
            v
        };
        if self.hover_mode {
            ws.plant.position = Vec3::new(take(), take(), take());
        } else {
            ws.plant.position = Vec3::new(template.plant.position.x, template.plant.position.y, take());
        }
        ws.plant.velocity = Vec3::new(take(), take(), take());
        let xi = Vec3::new(take(), take(), take());
        ws.plant.attitude = if xi.norm() > 1e-15 {
            reference_att.rotated_by(&(xi / xi.norm()), xi.norm()).orthonormalized().unwrap()
        } else {
            *reference_att
        };
        ws.plant.angular_rate = Vec3::new(take(), take(), take());
        ws.i_vz = take();
        if self.hover_mode {
            ws.i_vh = Vec3::new(take(), take(), 0.0);
            ws.i_vt = 0.0;
            ws.i_h_z = 0.0;
        } else {
            ws.i_vh = Vec3::zeros();
            ws.i_vt = take();
            ws.i_h_z = take();
        }
        ws.i_omega = Vec3::new(take(), take(), take());
        ws.actuators.realized.rotors = [take(), take(), take(), take()];
        ws.actuators.realized.pusher = take();
        ws.actuators.realized.aileron = take();
        ws.actuators.realized.ruddervator_l = take();
        ws.actuators.realized.ruddervator_r = take();
        ws
    }

    fn eval(&self, x: &DVector<f64>, template: &WorldState, ref_att: &BodyFrame) -> Result<DVector<f64>, LinearizeError> {
        let mut ws = self.unpack(x, template, ref_att);
        self.step_period(&mut ws)?;
        Ok(self.pack(&ws, ref_att))
    }

    fn jacobian(
        &self,
        x: &DVector<f64>,
        template: &WorldState,
        ref_att: &BodyFrame,
    ) -> Result<DMatrix<f64>, LinearizeError> {
        let n = x.len();
        let mut jac = DMatrix::zeros(n, n);
        for col in 0..n {
            let h = 1e-6 * (1.0 + x[col].abs());
            let mut xp = x.clone();
            xp[col] += h;
            let mut xm = x.clone();
            xm[col] -= h;
            let fp = self.eval(&xp, template, ref_att)?;
            let fm = self.eval(&xm, template, ref_att)?;
            let d = (fp - fm) / (2.0 * h);
            jac.set_column(col, &d);
        }
        Ok(jac)
    }
}

/// Finds the closed-loop trim at `airspeed` and returns the eigenvalues
/// of the linearized one-period map (continuous equivalents).
pub fn linearize_closed_loop(
    scenario: &Scenario,
    airspeed: f64,
) -> Result<LinearizationResult, LinearizeError> {
    let world = World::new(scenario, airspeed);

    // Initial guess: level flight at the requested airspeed, actuators
    // settled at the hover split, attitude level.
    let mut ws = WorldState {
        plant: VehicleState {
            position: Vec3::new(0.0, 0.0, Z_HOLD),
            velocity: Vec3::new(airspeed, 0.0, 0.0),
            attitude: BodyFrame::IDENTITY,
            angular_rate: Vec3::zeros(),
        },
        actuators: ActuatorState::settled(
            crate::plant::hover_command(&world.scenario.controller_model),
            world.scenario.tau_rotor,
            world.scenario.tau_surface,
            world.scenario.limits,
        ),
        i_vz: 0.0,
        i_vh: Vec3::zeros(),
        i_vt: 0.0,
        i_h_z: 0.0,
        i_omega: Vec3::zeros(),
    };

    // Settle: the closed loop is (expected to be) stable, so simulating is
    // the robust way to approach the equilibrium.
    let settle_periods = (60.0 / world.dt_outer()) as usize;
    for _ in 0..settle_periods {
        world.step_period(&mut ws)?;
    }

    // Newton polish on the fixed point of the one-period map.
    let t_period = world.dt_outer();
    let tol = 1e-8 * t_period; // 1e-8 on the state-derivative norm
    let ref_att = ws.plant.attitude;
    let template = ws.clone();
    let mut x = world.pack(&ws, &ref_att);
    let mut residual = f64::INFINITY;
    for _ in 0..10 {
        let fx = world.eval(&x, &template, &ref_att)?;
        let r = &fx - &x;
        residual = r.norm();
        if residual < tol {
            break;
        }
        let jac = world.jacobian(&x, &template, &ref_att)?;
        let n = x.len();
        let a = DMatrix::identity(n, n) - &jac;
        let Some(delta) = a.lu().solve(&r) else {
            return Err(LinearizeError::TrimNotFound { airspeed, residual });
        };
        x += delta;
    }
    if residual >= tol {
        return Err(LinearizeError::TrimNotFound { airspeed, residual });
    }

    let jac = world.jacobian(&x, &template, &ref_att)?;
    let mu = jac.complex_eigenvalues();
    let t = world.dt_outer();
    let eigenvalues: Vec<Complex<f64>> = mu
        .iter()
        .map(|m| {
            let ln_mag = m.norm().max(1e-300).ln();
            Complex::new(ln_mag / t, m.arg() / t)
        })
        .collect();
    let max_real_part = eigenvalues.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);

    // Neutral eigenvalues: candidates for trim-manifold kernel directions.
    const KERNEL_TOL: f64 = 1e-6;
    let kernel_dim = eigenvalues
        .iter()
        .filter(|e| e.re.abs() < KERNEL_TOL && e.im.abs() < KERNEL_TOL)
        .count();
    let mut kernel_verified = kernel_dim > 0;
    let mut max_dynamical_real_part = max_real_part;
    if kernel_dim > 0 {
        // Identify the kernel subspace from the singular vectors of J - I
        // and confirm that moving along it lands on another fixed point
        // (residual quadratic in the step, far below a generic direction).
        let n = x.len();
        let a = &jac - DMatrix::identity(n, n);
        let svd = a.svd(false, true);
        let v_t = svd.v_t.as_ref().expect("svd with v_t");
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
        let eps = 1e-3;
        for &idx in order.iter().take(kernel_dim) {
            if svd.singular_values[idx] > 1e-7 {
                kernel_verified = false;
                continue;
            }
            let dir = v_t.row(idx).transpose();
            let xp = &x + eps * &dir;
            let fp = world.eval(&xp, &template, &ref_att)?;
            let kernel_residual = (&fp - &xp).norm();
            if kernel_residual > 1e-2 * eps {
                kernel_verified = false;
            }
        }
        if kernel_verified {
            max_dynamical_real_part = eigenvalues
                .iter()
                .map(|e| e.re)
                .filter(|re| *re < -KERNEL_TOL || *re > KERNEL_TOL)
                .fold(f64::NEG_INFINITY, f64::max);
        }
    }

    Ok(LinearizationResult {
        airspeed,
        eigenvalues,
        max_real_part,
        max_dynamical_real_part,
        kernel_dim,
        kernel_verified,
        trim_residual: residual / t_period,
        dim: x.len(),
        jacobian: Some(jac),
    })
}
