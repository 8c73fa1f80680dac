//! Kinematic air-velocity estimation from the pitot airspeed, attitude
//! and inertial velocity, under the assumption of horizontal wind and
//! negligible sideslip.
//!
//! With horizontal wind the vertical component of the air velocity equals
//! that of the inertial velocity. Expanding the air velocity on the body
//! axes (with the lateral component set to zero) and solving for the
//! normal component gives the estimate; the division by `k . k0` is
//! regularized so the output stays bounded at extreme bank angles.

use crate::geom::{BodyFrame, Vec3, K0};

/// Estimated air velocity in body components (`v_a2` is zero by
/// construction) with diagnostic flow angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AirDataEstimate {
    pub v_a_body: Vec3,
    /// Diagnostic angle of attack, rad.
    pub alpha: f64,
    /// Diagnostic sideslip, zero by construction.
    pub beta: f64,
}

impl AirDataEstimate {
    pub fn airspeed(&self) -> f64 {
        self.v_a_body.norm()
    }

    pub fn to_inertial(&self, att: &BodyFrame) -> Vec3 {
        att.from_body(&self.v_a_body)
    }
}

/// Estimates the air-velocity vector. `v` is the measured inertial
/// velocity, `pitot` the measured forward airspeed component, `epsilon`
/// the singularity regularizer for the vertical projection of `k`.
pub fn estimate_air_velocity(
    v: &Vec3,
    att: &BodyFrame,
    pitot: f64,
    epsilon: f64,
) -> AirDataEstimate {
    let k_k0 = att.k.dot(&K0);
    let v_a3 = (v.dot(&K0) - pitot * att.i.dot(&K0)) * k_k0 / (k_k0 * k_k0 + epsilon);
    let v_a_body = Vec3::new(pitot, 0.0, v_a3);
    AirDataEstimate { v_a_body, alpha: v_a3.atan2(pitot), beta: 0.0 }
}
