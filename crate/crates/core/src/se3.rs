//! Rigid frame algebra.
//!
//! Poses are stored as a rotation matrix plus a translation in millimeters.
//! Composition re-projects the rotation onto SO(3) whenever accumulated
//! round-off pushes it further than [`ORTHONORMAL_TOL`] from orthonormal.

use core::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Unit, Vector3, Vector4};
use num_traits::Float;

/// Frobenius-norm bound on `RᵀR − I` before a rotation is re-orthonormalized.
pub const ORTHONORMAL_TOL: f64 = 1e-9;

/// A point in homogeneous coordinates with `w` fixed to 1.
///
/// Only the Cartesian part is stored, so the `w == 1` invariant holds by
/// construction.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AugmentedPoint(pub Vector3<f64>);

impl AugmentedPoint {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self(Vector3::new(x, y, z))
    }

    pub fn x(&self) -> f64 {
        self.0.x
    }

    pub fn y(&self) -> f64 {
        self.0.y
    }

    pub fn z(&self) -> f64 {
        self.0.z
    }

    pub fn w(&self) -> f64 {
        1.0
    }

    pub fn coords(&self) -> Vector3<f64> {
        self.0
    }

    pub fn homogeneous(&self) -> Vector4<f64> {
        self.0.push(1.0)
    }

    pub fn distance(&self, other: &AugmentedPoint) -> f64 {
        (self.0 - other.0).norm()
    }
}

impl From<Vector3<f64>> for AugmentedPoint {
    fn from(v: Vector3<f64>) -> Self {
        Self(v)
    }
}

/// Rigid transform in SE(3). Translation is in millimeters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
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

    /// Builds a pose, projecting `rotation` onto SO(3) if it has drifted.
    ///
    /// Returns `None` if the matrix is too far from a rotation to be repaired
    /// (non-finite entries or a determinant that is not clearly positive).
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Option<Self> {
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return None;
        }
        if rotation.determinant() <= 0.5 {
            return None;
        }
        Some(Self {
            rotation: orthonormalize(&rotation),
            translation,
        })
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    pub fn from_rotation(rotation: Matrix3<f64>) -> Option<Self> {
        Self::new(rotation, Vector3::zeros())
    }

    /// Rotation by `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        Self {
            rotation: axis_angle_matrix(axis, angle),
            translation: Vector3::zeros(),
        }
    }

    pub fn rot_x(angle: f64) -> Self {
        Self::from_axis_angle(&Vector3::x(), angle)
    }

    pub fn rot_y(angle: f64) -> Self {
        Self::from_axis_angle(&Vector3::y(), angle)
    }

    pub fn rot_z(angle: f64) -> Self {
        Self::from_axis_angle(&Vector3::z(), angle)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn with_translation(mut self, translation: Vector3<f64>) -> Self {
        self.translation = translation;
        self
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self · other` on homogeneous forms.
    pub fn compose(&self, other: &Pose) -> Self {
        let rotation = self.rotation * other.rotation;
        let rotation = if orthonormality_error(&rotation) > ORTHONORMAL_TOL {
            orthonormalize(&rotation)
        } else {
            rotation
        };
        Self {
            rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn transform_point(&self, p: &AugmentedPoint) -> AugmentedPoint {
        AugmentedPoint(self.rotation * p.0 + self.translation)
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// Rotation angle in radians, in `[0, π]`.
    pub fn rotation_angle(&self) -> f64 {
        rotation_angle(&self.rotation)
    }

    /// Frobenius distance between rotations plus Euclidean distance between
    /// translations (mm). Zero iff the poses are identical.
    pub fn distance(&self, other: &Pose) -> (f64, f64) {
        (
            (self.rotation - other.rotation).norm(),
            (self.translation - other.translation).norm(),
        )
    }

    pub fn approx_eq(&self, other: &Pose, tol: f64) -> bool {
        let (r, t) = self.distance(other);
        r <= tol && t <= tol
    }
}

impl Mul for Pose {
    type Output = Pose;

    fn mul(self, rhs: Pose) -> Pose {
        self.compose(&rhs)
    }
}

impl Mul<&Pose> for &Pose {
    type Output = Pose;

    fn mul(self, rhs: &Pose) -> Pose {
        self.compose(rhs)
    }
}

impl Mul<AugmentedPoint> for &Pose {
    type Output = AugmentedPoint;

    fn mul(self, rhs: AugmentedPoint) -> AugmentedPoint {
        self.transform_point(&rhs)
    }
}

pub fn compose(a: &Pose, b: &Pose) -> Pose {
    a.compose(b)
}

pub fn transform_point(p: &Pose, pt: &AugmentedPoint) -> AugmentedPoint {
    p.transform_point(pt)
}

/// ‖RᵀR − I‖_F
pub fn orthonormality_error(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).norm()
}

/// Nearest rotation in the Frobenius sense (polar factor of the SVD), with
/// the determinant forced to +1.
pub fn orthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = r.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return *r,
    };
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    u * d * v_t
}

/// Rodrigues' formula.
pub fn axis_angle_matrix(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let n = axis.norm();
    if n == 0.0 || angle == 0.0 {
        return Matrix3::identity();
    }
    let k = axis / n;
    let kx = k.cross_matrix();
    Matrix3::identity() + kx * Float::sin(angle) + kx * kx * (1.0 - Float::cos(angle))
}

pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let c = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    Float::acos(c)
}

/// Rotation taking unit vector `from` onto unit vector `to` by the shortest arc.
pub fn rotation_between(from: &Vector3<f64>, to: &Vector3<f64>) -> Matrix3<f64> {
    let a = Unit::new_normalize(*from);
    let b = Unit::new_normalize(*to);
    let axis = a.cross(&b);
    let s = axis.norm();
    let c = a.dot(&b);
    if s < 1e-15 {
        if c > 0.0 {
            return Matrix3::identity();
        }
        // Antiparallel: rotate π about any axis perpendicular to `from`.
        let perp = any_perpendicular(&a);
        return axis_angle_matrix(&perp, core::f64::consts::PI);
    }
    axis_angle_matrix(&axis, Float::atan2(s, c))
}

/// Some unit vector perpendicular to `v`.
pub fn any_perpendicular(v: &Vector3<f64>) -> Vector3<f64> {
    let candidate = if v.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    v.cross(&candidate).normalize()
}
