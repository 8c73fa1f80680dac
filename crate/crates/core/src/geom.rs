//! Frame-independent geometric primitives: vectors, orthonormal body
//! frames, saturation operators and rotation utilities.
//!
//! Conventions: inertial frame is North-East-Down, so `K0` points down
//! and altitude is `-z`. All angles are radians. Attitude is carried as
//! the three body axes expressed in inertial coordinates (equivalently a
//! rotation matrix), which is the representation the control laws are
//! written in.

use nalgebra::Matrix3;
use thiserror::Error;

pub type Vec3 = nalgebra::Vector3<f64>;

/// North axis of the inertial frame.
pub const I0: Vec3 = Vec3::new(1.0, 0.0, 0.0);
/// East axis of the inertial frame.
pub const J0: Vec3 = Vec3::new(0.0, 1.0, 0.0);
/// Down axis of the inertial frame (NED).
pub const K0: Vec3 = Vec3::new(0.0, 0.0, 1.0);

/// Orthonormality tolerance for frames (unit norms, pairwise dots).
pub const TOL_ORTHONORMAL: f64 = 1e-12;
/// Tolerance for geometric identities built from several operations.
pub const TOL_GEOMETRIC: f64 = 1e-10;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum GeomError {
    #[error("frame axes are collinear or degenerate")]
    CollinearAxes,
    #[error("vector expected to be unit length is not")]
    NotUnit,
}

/// Skew-symmetric matrix of `v`, i.e. `skew(v) * w == v.cross(w)`.
pub fn skew(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Scalar clamp to `[lo, hi]`. `lo <= hi` is a configuration invariant.
pub fn sat_scalar(x: f64, lo: f64, hi: f64) -> f64 {
    assert!(lo <= hi, "sat_scalar bounds inverted: [{lo}, {hi}]");
    x.clamp(lo, hi)
}

/// Norm saturation: returns `v` unchanged when `|v| <= max`, otherwise
/// rescales it to norm `max`, preserving direction.
pub fn sat_norm(v: &Vec3, max: f64) -> Vec3 {
    debug_assert!(max >= 0.0);
    let n = v.norm();
    if n <= max || n == 0.0 {
        *v
    } else {
        v * (max / n)
    }
}

/// Projection of `v` on the plane orthogonal to the unit vector `u`.
pub fn project_orthogonal(u: &Vec3, v: &Vec3) -> Vec3 {
    debug_assert!((u.norm() - 1.0).abs() < 1e-9, "project_orthogonal: non-unit axis");
    v - u * v.dot(u)
}

/// Horizontal part of `v` (projection on the plane orthogonal to `K0`).
pub fn horizontal(v: &Vec3) -> Vec3 {
    Vec3::new(v.x, v.y, 0.0)
}

/// Right-handed orthonormal triad of body axes, expressed in inertial
/// coordinates. Also used for reference frames produced by the setpoint
/// solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyFrame {
    pub i: Vec3,
    pub j: Vec3,
    pub k: Vec3,
}

impl BodyFrame {
    pub const IDENTITY: BodyFrame = BodyFrame { i: I0, j: J0, k: K0 };

    /// Builds a frame from raw axes, validating orthonormality.
    pub fn from_axes(i: Vec3, j: Vec3, k: Vec3) -> Result<Self, GeomError> {
        let f = BodyFrame { i, j, k };
        if f.orthonormality_defect() > 1e-9 {
            return Err(GeomError::NotUnit);
        }
        Ok(f)
    }

    /// Largest deviation from unit norms, orthogonality and right-handedness.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        d = d.max((self.i.norm() - 1.0).abs());
        d = d.max((self.j.norm() - 1.0).abs());
        d = d.max((self.k.norm() - 1.0).abs());
        d = d.max(self.i.dot(&self.j).abs());
        d = d.max(self.j.dot(&self.k).abs());
        d = d.max(self.k.dot(&self.i).abs());
        d = d.max((self.i.cross(&self.j) - self.k).norm());
        d
    }

    pub fn is_orthonormal(&self, tol: f64) -> bool {
        self.orthonormality_defect() <= tol
    }

    /// Gram-Schmidt re-orthonormalization keeping the `i` direction, then
    /// the `i`-`j` plane. Returns an error when the axes are collinear.
    pub fn orthonormalized(&self) -> Result<Self, GeomError> {
        let ni = self.i.norm();
        if ni < 1e-12 {
            return Err(GeomError::CollinearAxes);
        }
        let i = self.i / ni;
        let j_raw = self.j - i * self.j.dot(&i);
        let nj = j_raw.norm();
        if nj < 1e-9 {
            return Err(GeomError::CollinearAxes);
        }
        let j = j_raw / nj;
        let k = i.cross(&j);
        Ok(BodyFrame { i, j, k })
    }

    /// Rotation matrix with the body axes as columns; maps body
    /// coordinates to inertial coordinates.
    pub fn rotation(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&[self.i, self.j, self.k])
    }

    /// Components of an inertial vector along the body axes.
    pub fn to_body(&self, v: &Vec3) -> Vec3 {
        Vec3::new(v.dot(&self.i), v.dot(&self.j), v.dot(&self.k))
    }

    /// Inertial vector from body components.
    pub fn from_body(&self, v: &Vec3) -> Vec3 {
        self.i * v.x + self.j * v.y + self.k * v.z
    }

    /// Frame obtained by rotating the identity frame by `angle` about the
    /// unit `axis` (inertial).
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        BodyFrame::IDENTITY.rotated_by(axis, angle)
    }

    /// Rotates every axis of the frame by `angle` about the unit `axis`.
    pub fn rotated_by(&self, axis: &Vec3, angle: f64) -> Self {
        let r = AxisAngle { axis: *axis, angle };
        BodyFrame {
            i: r.rotate(&self.i),
            j: r.rotate(&self.j),
            k: r.rotate(&self.k),
        }
    }

    /// Zero-lift axes `(i2, k2)`: `i` rotated by `alpha0` about `j` so that
    /// `i2` is aligned with the zero-lift line.
    pub fn zero_lift_axes(&self, alpha0: f64) -> (Vec3, Vec3) {
        let (s, c) = alpha0.sin_cos();
        (self.i * c - self.k * s, self.i * s + self.k * c)
    }

    /// Pitch angle of the fuselage axis above the horizontal plane.
    pub fn pitch(&self) -> f64 {
        (-self.i.dot(&K0)).asin()
    }

    /// Heading angle of the fuselage axis, measured from north.
    pub fn heading(&self) -> f64 {
        self.i.dot(&J0).atan2(self.i.dot(&I0))
    }
}

/// Attitude error vector `i x i_r + j x j_r + k x k_r`. For frames related
/// by a rotation of angle `theta` about the unit axis `u` this equals
/// `2 sin(theta) u`.
pub fn frame_error_vector(frame: &BodyFrame, reference: &BodyFrame) -> Vec3 {
    frame.i.cross(&reference.i) + frame.j.cross(&reference.j) + frame.k.cross(&reference.k)
}

/// Rotation angle in `[0, pi]` between two orthonormal frames, robust near
/// both ends of the range.
pub fn rotation_angle_between(frame: &BodyFrame, reference: &BodyFrame) -> f64 {
    // trace(R_rel) = 1 + 2 cos(theta); |omega0| = 2 |sin(theta)|
    let trace = frame.i.dot(&reference.i) + frame.j.dot(&reference.j) + frame.k.dot(&reference.k);
    let sin2 = frame_error_vector(frame, reference).norm();
    (sin2 / 2.0).atan2((trace - 1.0) / 2.0)
}

/// Axis-angle rotation, `angle` in `[0, pi]` about a unit `axis`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisAngle {
    pub axis: Vec3,
    pub angle: f64,
}

impl AxisAngle {
    pub fn new(axis: Vec3, angle: f64) -> Result<Self, GeomError> {
        if (axis.norm() - 1.0).abs() > 1e-9 {
            return Err(GeomError::NotUnit);
        }
        Ok(AxisAngle { axis, angle })
    }

    /// Rodrigues rotation of `v`.
    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        let (s, c) = self.angle.sin_cos();
        v * c + self.axis.cross(v) * s + self.axis * (self.axis.dot(v) * (1.0 - c))
    }
}

/// Wraps an angle to `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut x = (a + std::f64::consts::PI).rem_euclid(two_pi);
    if x < 0.0 {
        x += two_pi;
    }
    x - std::f64::consts::PI
}
