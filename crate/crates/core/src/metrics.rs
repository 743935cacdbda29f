//! Success criteria and the distance-weighted success rate.

use crate::articulation::{JointKind, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("expected distance must be positive, got {0}")]
    InvalidExpectedDistance(f64),
    #[error("actual distance must be non-negative, got {0}")]
    InvalidActualDistance(f64),
}

/// `min(d_A, d_E) / d_E × 100`.
pub fn weighted_success(d_actual: f64, d_expected: f64) -> Result<f64, MetricsError> {
    if !(d_expected > 0.0) {
        return Err(MetricsError::InvalidExpectedDistance(d_expected));
    }
    if !(d_actual >= 0.0) {
        return Err(MetricsError::InvalidActualDistance(d_actual));
    }
    Ok(d_actual.min(d_expected) / d_expected * 100.0)
}

/// When a trial counts as a success.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SuccessCriterion {
    /// Joint rotation beyond an angle (rad).
    JointAngle(f64),
    /// Handle travel along the trajectory beyond a distance (mm).
    Extension(f64),
    /// Handle reaches the end of its trajectory.
    ReachEnd,
}

pub const REVOLUTE_SUCCESS_ANGLE: f64 = core::f64::consts::PI / 3.0;
pub const PRISMATIC_SUCCESS_EXTENSION: f64 = 250.0;
const END_TOLERANCE: f64 = 1e-9;

impl SuccessCriterion {
    pub fn default_for(traj: &Trajectory) -> Self {
        match traj.kind() {
            JointKind::Revolute { .. } => Self::JointAngle(REVOLUTE_SUCCESS_ANGLE),
            JointKind::Prismatic { .. } => Self::Extension(PRISMATIC_SUCCESS_EXTENSION),
            JointKind::Helical { .. } | JointKind::Bezier { .. } => Self::ReachEnd,
        }
    }

    pub fn is_met(&self, traj: &Trajectory, s: f64) -> bool {
        match *self {
            Self::JointAngle(angle) => match traj.kind() {
                JointKind::Revolute { span, .. } | JointKind::Helical { span, .. } => (s - traj.start()) * span.abs() > angle,
                _ => false,
            },
            Self::Extension(mm) => actual_distance(traj, s) > mm,
            Self::ReachEnd => s >= 1.0 - END_TOLERANCE,
        }
    }

    /// `d_E`: handle travel the criterion corresponds to (mm).
    pub fn expected_distance(&self, traj: &Trajectory) -> f64 {
        match *self {
            Self::JointAngle(angle) => traj.radius().unwrap_or(0.0) * angle,
            Self::Extension(mm) => mm,
            Self::ReachEnd => actual_distance(traj, 1.0),
        }
    }
}

/// `d_A`: handle travel from the start parameter to `s` (mm).
pub fn actual_distance(traj: &Trajectory, s: f64) -> f64 {
    let s = s.clamp(traj.start(), 1.0);
    traj.arc_length(traj.start(), s).unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::se3::Pose;
    use nalgebra::Vector3;

    #[test]
    fn formula() {
        assert_eq!(weighted_success(250.0, 250.0).unwrap(), 100.0);
        assert_eq!(weighted_success(125.0, 250.0).unwrap(), 50.0);
        assert_eq!(weighted_success(500.0, 250.0).unwrap(), 100.0);
        assert_eq!(weighted_success(0.0, 250.0).unwrap(), 0.0);
        assert_eq!(weighted_success(1.0, 0.0), Err(MetricsError::InvalidExpectedDistance(0.0)));
    }

    #[test]
    fn revolute_expected_distance_is_sixty_degree_arc() {
        let door = Trajectory::revolute(
            Pose::identity(),
            Vector3::new(-400.0, 0.0, 0.0),
            Vector3::new(0.0, 0.0, -1.0),
            core::f64::consts::FRAC_PI_2,
        )
        .unwrap();
        let c = SuccessCriterion::default_for(&door);
        assert!((c.expected_distance(&door) - 400.0 * core::f64::consts::PI / 3.0).abs() < 1e-9);
        assert!(!c.is_met(&door, 0.6));
        assert!(c.is_met(&door, 0.7));
    }

    #[test]
    fn prismatic_threshold() {
        let drawer = Trajectory::prismatic(Pose::identity(), Vector3::new(0.0, -1.0, 0.0), 300.0).unwrap();
        let c = SuccessCriterion::default_for(&drawer);
        assert_eq!(c.expected_distance(&drawer), 250.0);
        assert!(!c.is_met(&drawer, 250.0 / 300.0 - 1e-6));
        assert!(c.is_met(&drawer, 250.0 / 300.0 + 1e-6));
    }
}
