//! One-DoF handle trajectories.
//!
//! Every trajectory maps a parameter `s ∈ [0, 1]` to the handle pose. Joint
//! trajectories (prismatic, revolute, helical) move a rest pose; Bézier
//! playboards place the handle on a planar curve with its y axis along the
//! tangent and its z axis along the board normal.

pub mod bezier;
mod playboard;

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{Matrix3, Vector2, Vector3};
use num_traits::Float;

use crate::se3::{axis_angle_matrix, Pose};

pub use playboard::{generate_playboard, generate_playboard_with, self_intersects, PlayboardConfig, SELF_INTERSECTION_SEGMENTS};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ArticulationError {
    #[error("parameter {0} outside [0, 1]")]
    DomainViolation(f64),
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(&'static str),
    #[error("invalid playboard config: {0}")]
    InvalidConfig(&'static str),
    #[error("no admissible playboard after {0} rejections")]
    GenerationExhausted(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum JointKind {
    /// Straight travel of `length` mm along the unit `direction`.
    Prismatic { direction: Vector3<f64>, length: f64 },
    /// Rotation by up to `span` radians about the line through `axis_point`
    /// along the unit `axis_dir` (right-hand rule).
    Revolute {
        axis_point: Vector3<f64>,
        axis_dir: Vector3<f64>,
        span: f64,
    },
    /// Revolute motion plus `pitch` mm of axial travel per revolution.
    Helical {
        axis_point: Vector3<f64>,
        axis_dir: Vector3<f64>,
        span: f64,
        pitch: f64,
    },
    /// Planar Bézier groove; control points in board coordinates (mm).
    Bezier { control: Vec<Vector2<f64>>, board: Pose },
}

impl JointKind {
    pub fn name(&self) -> &'static str {
        match self {
            JointKind::Prismatic { .. } => "prismatic",
            JointKind::Revolute { .. } => "revolute",
            JointKind::Helical { .. } => "helical",
            JointKind::Bezier { .. } => "bezier",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    kind: JointKind,
    /// Parameter at which the handle starts.
    start: f64,
    handle_rest_pose: Pose,
}

impl Trajectory {
    pub fn prismatic(handle_rest_pose: Pose, direction: Vector3<f64>, length: f64) -> Result<Self, ArticulationError> {
        if !(length > 0.0) {
            return Err(ArticulationError::InvalidTrajectory("prismatic length must be positive"));
        }
        Ok(Self {
            kind: JointKind::Prismatic {
                direction: unit(direction)?,
                length,
            },
            start: 0.0,
            handle_rest_pose,
        })
    }

    pub fn revolute(handle_rest_pose: Pose, axis_point: Vector3<f64>, axis_dir: Vector3<f64>, span: f64) -> Result<Self, ArticulationError> {
        let axis_dir = unit(axis_dir)?;
        check_axis(&handle_rest_pose, &axis_point, &axis_dir, span)?;
        Ok(Self {
            kind: JointKind::Revolute {
                axis_point,
                axis_dir,
                span,
            },
            start: 0.0,
            handle_rest_pose,
        })
    }

    pub fn helical(
        handle_rest_pose: Pose,
        axis_point: Vector3<f64>,
        axis_dir: Vector3<f64>,
        span: f64,
        pitch: f64,
    ) -> Result<Self, ArticulationError> {
        let axis_dir = unit(axis_dir)?;
        check_axis(&handle_rest_pose, &axis_point, &axis_dir, span)?;
        if !pitch.is_finite() {
            return Err(ArticulationError::InvalidTrajectory("helical pitch must be finite"));
        }
        Ok(Self {
            kind: JointKind::Helical {
                axis_point,
                axis_dir,
                span,
                pitch,
            },
            start: 0.0,
            handle_rest_pose,
        })
    }

    /// Bézier playboard with the handle starting at parameter `start`.
    pub fn bezier(control: Vec<Vector2<f64>>, board: Pose, start: f64) -> Result<Self, ArticulationError> {
        if !(3..=6).contains(&control.len()) {
            return Err(ArticulationError::InvalidTrajectory("bezier needs 3 to 6 control points"));
        }
        if !(0.0..1.0).contains(&start) {
            return Err(ArticulationError::InvalidTrajectory("bezier start must lie in [0, 1)"));
        }
        let handle_rest_pose = bezier_pose(&control, &board, start);
        Ok(Self {
            kind: JointKind::Bezier { control, board },
            start,
            handle_rest_pose,
        })
    }

    pub fn kind(&self) -> &JointKind {
        &self.kind
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn handle_rest_pose(&self) -> &Pose {
        &self.handle_rest_pose
    }

    /// Distance from the handle's rest position to the joint axis, for
    /// rotational kinds.
    pub fn radius(&self) -> Option<f64> {
        match &self.kind {
            JointKind::Revolute { axis_point, axis_dir, .. } | JointKind::Helical { axis_point, axis_dir, .. } => {
                Some(radial_offset(self.handle_rest_pose.translation(), axis_point, axis_dir).norm())
            }
            _ => None,
        }
    }

    pub fn pose_at(&self, s: f64) -> Result<Pose, ArticulationError> {
        if !(0.0..=1.0).contains(&s) {
            return Err(ArticulationError::DomainViolation(s));
        }
        Ok(self.pose_unchecked(s))
    }

    pub(crate) fn pose_unchecked(&self, s: f64) -> Pose {
        let rest = &self.handle_rest_pose;
        match &self.kind {
            JointKind::Prismatic { direction, length } => {
                Pose::from_translation(direction * (s * length)).compose(rest)
            }
            JointKind::Revolute {
                axis_point,
                axis_dir,
                span,
            } => screw_motion(axis_point, axis_dir, s * span, 0.0).compose(rest),
            JointKind::Helical {
                axis_point,
                axis_dir,
                span,
                pitch,
            } => {
                let angle = s * span;
                screw_motion(axis_point, axis_dir, angle, pitch * angle / (2.0 * PI)).compose(rest)
            }
            JointKind::Bezier { control, board } => bezier_pose(control, board, s),
        }
    }

    pub fn position_at(&self, s: f64) -> Result<Vector3<f64>, ArticulationError> {
        self.pose_at(s).map(|p| *p.translation())
    }

    /// ‖d position / ds‖ in mm per unit parameter.
    pub fn speed_at(&self, s: f64) -> f64 {
        match &self.kind {
            JointKind::Prismatic { length, .. } => *length,
            JointKind::Revolute { span, .. } => self.radius().unwrap_or(0.0) * span.abs(),
            JointKind::Helical { span, pitch, .. } => {
                let tangential = self.radius().unwrap_or(0.0) * span.abs();
                let axial = pitch * span.abs() / (2.0 * PI);
                (tangential * tangential + axial * axial).sqrt()
            }
            JointKind::Bezier { control, .. } => bezier::derivative(control, s).norm(),
        }
    }

    /// Handle path length between `s0` and `s1` (mm).
    ///
    /// Joint kinds have constant speed; Bézier curves use adaptive Simpson
    /// quadrature of the hodograph norm to a relative tolerance of 1e-6.
    pub fn arc_length(&self, s0: f64, s1: f64) -> Result<f64, ArticulationError> {
        if !(0.0..=1.0).contains(&s0) {
            return Err(ArticulationError::DomainViolation(s0));
        }
        if !(s0..=1.0).contains(&s1) {
            return Err(ArticulationError::DomainViolation(s1));
        }
        if s0 == s1 {
            return Ok(0.0);
        }
        match &self.kind {
            JointKind::Bezier { control, .. } => {
                let hodo = bezier::hodograph(control);
                let speed = |s: f64| bezier::point(&hodo, s).norm();
                Ok(adaptive_simpson(&speed, s0, s1, ARC_LENGTH_RTOL))
            }
            _ => Ok(self.speed_at(s0) * (s1 - s0)),
        }
    }

    /// Arc length from the start parameter to the end of travel.
    pub fn total_arc_length(&self) -> f64 {
        self.arc_length(self.start, 1.0).unwrap_or(0.0)
    }

    /// Copy with the handle starting at another parameter.
    pub fn with_start(&self, start: f64) -> Result<Self, ArticulationError> {
        if !(0.0..1.0).contains(&start) {
            return Err(ArticulationError::DomainViolation(start));
        }
        let mut out = self.clone();
        match &self.kind {
            JointKind::Bezier { control, board } => {
                out.start = start;
                out.handle_rest_pose = bezier_pose(control, board, start);
            }
            _ => {
                // Joint kinds anchor their rest pose at s = 0.
                if start != 0.0 {
                    return Err(ArticulationError::InvalidTrajectory("joint trajectories start at s = 0"));
                }
            }
        }
        Ok(out)
    }

    pub(crate) fn with_kind(&self, kind: JointKind) -> Self {
        let mut out = Self {
            kind,
            start: self.start,
            handle_rest_pose: self.handle_rest_pose,
        };
        if let JointKind::Bezier { control, board } = &out.kind {
            out.handle_rest_pose = bezier_pose(control, board, out.start);
        }
        out
    }
}

const ARC_LENGTH_RTOL: f64 = 1e-6;

fn unit(v: Vector3<f64>) -> Result<Vector3<f64>, ArticulationError> {
    let n = v.norm();
    if !(n > 1e-12) || !n.is_finite() {
        return Err(ArticulationError::InvalidTrajectory("direction must be non-zero"));
    }
    Ok(v / n)
}

fn check_axis(rest: &Pose, axis_point: &Vector3<f64>, axis_dir: &Vector3<f64>, span: f64) -> Result<(), ArticulationError> {
    if !(span.is_finite() && span != 0.0) {
        return Err(ArticulationError::InvalidTrajectory("span must be finite and non-zero"));
    }
    if radial_offset(rest.translation(), axis_point, axis_dir).norm() < 1e-9 {
        return Err(ArticulationError::InvalidTrajectory("handle lies on the joint axis"));
    }
    Ok(())
}

fn radial_offset(p: &Vector3<f64>, axis_point: &Vector3<f64>, axis_dir: &Vector3<f64>) -> Vector3<f64> {
    let rel = p - axis_point;
    rel - axis_dir * rel.dot(axis_dir)
}

/// World motion: rotate by `angle` about the axis line, then slide `axial`
/// mm along it.
fn screw_motion(axis_point: &Vector3<f64>, axis_dir: &Vector3<f64>, angle: f64, axial: f64) -> Pose {
    let r = axis_angle_matrix(axis_dir, angle);
    let t = axis_point - r * axis_point + axis_dir * axial;
    Pose::new(r, t).unwrap_or_else(Pose::identity)
}

fn bezier_pose(control: &[Vector2<f64>], board: &Pose, s: f64) -> Pose {
    let p = bezier::point(control, s);
    let t = bezier::unit_tangent(control, s);
    let tangent = Vector3::new(t.x, t.y, 0.0);
    let normal = Vector3::z();
    let lateral = tangent.cross(&normal);
    let r = Matrix3::from_columns(&[lateral, tangent, normal]);
    let local = Pose::new(r, Vector3::new(p.x, p.y, 0.0)).unwrap_or_else(Pose::identity);
    board.compose(&local)
}

fn simpson(f0: f64, fm: f64, f1: f64, h: f64) -> f64 {
    h / 6.0 * (f0 + 4.0 * fm + f1)
}

pub(crate) fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rtol: f64) -> f64 {
    // Seed with a composite rule on 16 panels so narrow features cannot hide
    // between the first samples.
    const PANELS: usize = 16;
    let mut total = 0.0;
    let mut coarse = 0.0;
    let h = (b - a) / PANELS as f64;
    let mut parts = [0.0; PANELS];
    let mut estimates = [(0.0, 0.0, 0.0, 0.0); PANELS];
    for (k, part) in parts.iter_mut().enumerate() {
        let x0 = a + k as f64 * h;
        let x1 = if k + 1 == PANELS { b } else { x0 + h };
        let (f0, fm, f1) = (f(x0), f(0.5 * (x0 + x1)), f(x1));
        *part = simpson(f0, fm, f1, x1 - x0);
        estimates[k] = (f0, fm, f1, x1 - x0);
        coarse += *part;
    }
    let abs_tol = rtol * coarse.abs().max(f64::MIN_POSITIVE);
    for k in 0..PANELS {
        let x0 = a + k as f64 * h;
        let (f0, fm, f1, width) = estimates[k];
        total += refine(f, x0, x0 + width, f0, fm, f1, parts[k], abs_tol / PANELS as f64, 40);
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn refine(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    if depth == 0 || Float::abs(delta) <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    refine(f, a, m, fa, flm, fm, left, tol * 0.5, depth - 1) + refine(f, m, b, fm, frm, fb, right, tol * 0.5, depth - 1)
}
