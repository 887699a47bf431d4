//! Rigid-body pose algebra on SE(3).
//!
//! Rotations are stored as 3×3 matrices. Quaternions only appear at the
//! trajectory-file boundary ([`Pose::from_quaternion`], [`Pose::quaternion`]).
//!
//! Tangent vectors ([`Twist`]) are split into a rotational part (axis-angle,
//! radians) and a translational part. When packed into a 6-vector for
//! optimization the order is `[translation, rotation]`.

use core::fmt;
use core::ops::Mul;

use nalgebra::{Matrix3, Vector3, Vector6, SVD};
#[allow(unused_imports)]
use num_traits::Float;

/// Angle below which `exp`/`log` switch to their Taylor expansions.
const SMALL_ANGLE: f64 = 1e-8;

/// Determinant drift that triggers re-orthonormalization after a composition.
const DET_DRIFT: f64 = 1e-9;

/// Distance from π below which the logarithm is considered ambiguous.
const PI_AMBIGUITY: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeometryError {
    /// The rotation angle is (numerically) π and its axis is not unique.
    AmbiguousAxis { angle: f64 },
    /// The matrix handed in is not a proper rotation.
    NotARotation { det: f64 },
    /// A quaternion with (near) zero norm.
    DegenerateQuaternion,
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::AmbiguousAxis { angle } => {
                write!(f, "logarithm undefined at rotation angle {angle} (axis ambiguity at pi)")
            }
            Self::NotARotation { det } => write!(f, "matrix is not a rotation (det = {det})"),
            Self::DegenerateQuaternion => f.write_str("quaternion has zero norm"),
        }
    }
}

impl core::error::Error for GeometryError {}

/// A rigid transform `x ↦ R x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

/// Minimal 6-parameter representation of a pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Twist {
    /// Axis-angle vector, radians.
    pub rotation: Vector3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a pose from a rotation matrix, projecting it onto SO(3) if it
    /// drifted slightly. Fails if the determinant is not positive.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        let det = rotation.determinant();
        if !(det > 0.0) || !rotation.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NotARotation { det });
        }
        let rotation = if (det - 1.0).abs() > DET_DRIFT || !is_orthonormal(&rotation, 1e-9) {
            nearest_rotation(&rotation)
        } else {
            rotation
        };
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Same as [`Pose::new`] but trusts the caller that `rotation` is in SO(3).
    pub fn from_parts_unchecked(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn translate(x: f64, y: f64, z: f64) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::new(x, y, z),
        }
    }

    pub fn rot_x(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::from_parts_unchecked(
            Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c),
            Vector3::zeros(),
        )
    }

    pub fn rot_y(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::from_parts_unchecked(
            Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c),
            Vector3::zeros(),
        )
    }

    pub fn rot_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::from_parts_unchecked(
            Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
            Vector3::zeros(),
        )
    }

    /// Returns a copy with the translation replaced.
    pub fn with_translation(mut self, translation: Vector3<f64>) -> Self {
        self.translation = translation;
        self
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    /// The translational component, unchanged.
    pub fn trans(&self) -> Vector3<f64> {
        self.translation
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        let mut rotation = self.rotation * other.rotation;
        if (rotation.determinant() - 1.0).abs() > DET_DRIFT {
            rotation = nearest_rotation(&rotation);
        }
        Pose {
            rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(&self) -> f64 {
        rotation_angle(&self.rotation)
    }

    pub fn exp(t: &Twist) -> Pose {
        let w = &t.rotation;
        let theta = w.norm();
        let k = skew(w);
        let k2 = k * k;
        let (a, b, c) = if theta < SMALL_ANGLE {
            (1.0, 0.5, 1.0 / 6.0)
        } else {
            let (s, co) = theta.sin_cos();
            let t2 = theta * theta;
            (s / theta, (1.0 - co) / t2, (theta - s) / (t2 * theta))
        };
        let rotation = Matrix3::identity() + k * a + k2 * b;
        let v = Matrix3::identity() + k * b + k2 * c;
        Pose {
            rotation,
            translation: v * t.translation,
        }
    }

    /// Inverse of [`Pose::exp`] for rotation angles below π.
    pub fn log(&self) -> Result<Twist, GeometryError> {
        let r = &self.rotation;
        let vee = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
        let sin_theta = 0.5 * vee.norm();
        let cos_theta = 0.5 * (r.trace() - 1.0);
        let theta = sin_theta.atan2(cos_theta);
        if core::f64::consts::PI - theta < PI_AMBIGUITY {
            return Err(GeometryError::AmbiguousAxis { angle: theta });
        }
        let (w, vinv) = if theta < SMALL_ANGLE {
            let w = vee * 0.5;
            let k = skew(&w);
            (w, Matrix3::identity() - k * 0.5 + k * k * (1.0 / 12.0))
        } else {
            let w = vee * (theta / (2.0 * sin_theta));
            let k = skew(&w);
            let t2 = theta * theta;
            let coef = (1.0 - theta * sin_theta / (2.0 * (1.0 - cos_theta))) / t2;
            (w, Matrix3::identity() - k * 0.5 + k * k * coef)
        };
        Ok(Twist {
            rotation: w,
            translation: vinv * self.translation,
        })
    }

    /// Unit quaternion `(x, y, z, w)` of the rotation, with `w ≥ 0`.
    pub fn quaternion(&self) -> [f64; 4] {
        let m = &self.rotation;
        let tr = m.trace();
        let q = if tr > 0.0 {
            let s = (tr + 1.0).sqrt() * 2.0;
            [
                (m[(2, 1)] - m[(1, 2)]) / s,
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(1, 0)] - m[(0, 1)]) / s,
                0.25 * s,
            ]
        } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
            let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
            [
                0.25 * s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
                (m[(2, 1)] - m[(1, 2)]) / s,
            ]
        } else if m[(1, 1)] > m[(2, 2)] {
            let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * 2.0;
            [
                (m[(0, 1)] + m[(1, 0)]) / s,
                0.25 * s,
                (m[(1, 2)] + m[(2, 1)]) / s,
                (m[(0, 2)] - m[(2, 0)]) / s,
            ]
        } else {
            let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * 2.0;
            [
                (m[(0, 2)] + m[(2, 0)]) / s,
                (m[(1, 2)] + m[(2, 1)]) / s,
                0.25 * s,
                (m[(1, 0)] - m[(0, 1)]) / s,
            ]
        };
        let sign = if q[3] < 0.0 { -1.0 } else { 1.0 };
        let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
        q.map(|c| c * sign / n)
    }

    /// Rotation from a quaternion `(x, y, z, w)`; the quaternion is normalized.
    pub fn from_quaternion(q: [f64; 4], translation: Vector3<f64>) -> Result<Pose, GeometryError> {
        let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
        if !(n > 1e-12) {
            return Err(GeometryError::DegenerateQuaternion);
        }
        let [x, y, z, w] = q.map(|c| c / n);
        let rotation = Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - z * w),
            2.0 * (x * z + y * w),
            2.0 * (x * y + z * w),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - x * w),
            2.0 * (x * z - y * w),
            2.0 * (y * z + x * w),
            1.0 - 2.0 * (x * x + y * y),
        );
        Ok(Pose {
            rotation,
            translation,
        })
    }

    /// Homogeneous 4×4 matrix, row-major.
    pub fn to_homogeneous(&self) -> [[f64; 4]; 4] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            [r[(0, 0)], r[(0, 1)], r[(0, 2)], t[0]],
            [r[(1, 0)], r[(1, 1)], r[(1, 2)], t[1]],
            [r[(2, 0)], r[(2, 1)], r[(2, 2)], t[2]],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }

    /// Largest absolute elementwise difference of the homogeneous matrices.
    pub fn max_abs_diff(&self, other: &Pose) -> f64 {
        let r = (self.rotation - other.rotation).amax();
        let t = (self.translation - other.translation).amax();
        r.max(t)
    }
}

impl Mul for Pose {
    type Output = Pose;
    fn mul(self, rhs: Pose) -> Pose {
        self.compose(&rhs)
    }
}

impl<'a> Mul<&'a Pose> for &'a Pose {
    type Output = Pose;
    fn mul(self, rhs: &'a Pose) -> Pose {
        self.compose(rhs)
    }
}

impl Twist {
    pub fn zero() -> Self {
        Self {
            rotation: Vector3::zeros(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Vector3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    /// Packs into `[translation, rotation]`.
    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.translation[0],
            self.translation[1],
            self.translation[2],
            self.rotation[0],
            self.rotation[1],
            self.rotation[2],
        )
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self {
            translation: Vector3::new(v[0], v[1], v[2]),
            rotation: Vector3::new(v[3], v[4], v[5]),
        }
    }

    pub fn max_abs_diff(&self, other: &Twist) -> f64 {
        (self.to_vector() - other.to_vector()).amax()
    }
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v[2], v[1], v[2], 0.0, -v[0], -v[1], v[0], 0.0)
}

/// Rotation angle of a rotation matrix, in `[0, π]`.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let vee = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    (0.5 * vee.norm()).atan2(0.5 * (r.trace() - 1.0))
}

fn is_orthonormal(r: &Matrix3<f64>, tol: f64) -> bool {
    (r.transpose() * r - Matrix3::identity()).amax() <= tol
}

/// Orthogonal polar factor of `m` (closest rotation in Frobenius norm).
pub fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = SVD::new(*m, true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return *m,
    };
    let mut d = Matrix3::identity();
    if (u * vt).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    u * d * vt
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::FRAC_PI_2;

    #[test]
    fn compose_rotation_then_translation() {
        let p = Pose::rot_z(FRAC_PI_2) * Pose::translate(1.0, 0.0, 0.0);
        assert!((p.trans() - Vector3::new(0.0, 1.0, 0.0)).amax() < 1e-12);
        assert!((p.rotation() - Pose::rot_z(FRAC_PI_2).rotation()).amax() < 1e-12);
    }

    #[test]
    fn inverse_of_rotated_pose() {
        let p = Pose::rot_z(FRAC_PI_2).with_translation(Vector3::new(1.0, 0.0, 0.0));
        let inv = p.inverse();
        assert!((inv.rotation() - Pose::rot_z(-FRAC_PI_2).rotation()).amax() < 1e-12);
        assert!((inv.trans() - Vector3::new(0.0, 1.0, 0.0)).amax() < 1e-12);
        assert!((inv * p).max_abs_diff(&Pose::identity()) < 1e-12);
    }

    #[test]
    fn translations_add() {
        let p = Pose::translate(1.0, 0.0, 0.0) * Pose::translate(0.0, 2.0, 0.0);
        assert_eq!(p, Pose::translate(1.0, 2.0, 0.0));
        assert_eq!(Pose::translate(1.0, 2.0, 3.0).inverse(), Pose::translate(-1.0, -2.0, -3.0));
    }

    #[test]
    fn exp_of_zero_and_quarter_turn() {
        assert_eq!(Pose::exp(&Twist::zero()), Pose::identity());
        let p = Pose::exp(&Twist::new(Vector3::new(0.0, 0.0, FRAC_PI_2), Vector3::zeros()));
        assert!(p.max_abs_diff(&Pose::rot_z(FRAC_PI_2)) < 1e-15);
    }

    #[test]
    fn log_small_angle_branch() {
        let t = Twist::new(Vector3::new(1e-10, -2e-10, 3e-11), Vector3::new(0.3, -0.1, 2.0));
        let back = Pose::exp(&t).log().unwrap();
        assert!(back.max_abs_diff(&t) < 1e-15);
    }

    #[test]
    fn log_rejects_half_turn() {
        let p = Pose::rot_x(core::f64::consts::PI);
        assert!(matches!(p.log(), Err(GeometryError::AmbiguousAxis { .. })));
    }

    #[test]
    fn quaternion_of_identity_is_exact() {
        assert_eq!(Pose::identity().quaternion(), [0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn quaternion_roundtrip_each_branch() {
        for p in [
            Pose::rot_z(0.3),
            Pose::rot_x(3.0),
            Pose::rot_y(3.0),
            Pose::rot_z(3.0),
            Pose::rot_x(1.0) * Pose::rot_y(-2.5),
        ] {
            let q = p.quaternion();
            let back = Pose::from_quaternion(q, Vector3::zeros()).unwrap();
            assert!(back.max_abs_diff(&p) < 1e-14);
        }
    }

    #[test]
    fn new_reprojects_drifted_rotation() {
        let mut m = *Pose::rot_z(0.4).rotation();
        m[(0, 0)] += 1e-6;
        let p = Pose::new(m, Vector3::zeros()).unwrap();
        assert!((p.rotation().determinant() - 1.0).abs() < 1e-12);
        assert!(Pose::new(-Matrix3::identity(), Vector3::zeros()).is_err());
    }
}
