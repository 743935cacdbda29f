//! Comparison methods: an open-loop executor that replays a noisy kinematic
//! model, and a compliant straight-line follower with no model at all.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{Vector2, Vector3};
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::articulation::{JointKind, Trajectory};
use crate::contact::{summarize_pads, ContactSet};
use crate::controller::{FailureReason, IterationRecord, Phase, TrialResult};
use crate::metrics::SuccessCriterion;
use crate::se3::{any_perpendicular, axis_angle_matrix, Pose};
use crate::sim::{observe_averaged, step_gripper_in_place, ContactPolicy, SimConfig, SimError, WorldState, PAD_COUNT};

/// Millimeters per meter; model noise is specified in SI units.
const MM_PER_M: f64 = 1000.0;
/// Perturbed revolute and helical radii never shrink below this (mm).
const MIN_RADIUS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BaselineError {
    #[error("invalid baseline config: {0}")]
    InvalidConfig(&'static str),
    #[error("model perturbation not supported for {0} trajectories")]
    UnsupportedKind(&'static str),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Gaussian model noise ξ. `xi_std` is in meters for lengths and radians
/// for angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineNoise {
    pub xi_std: f64,
    pub seed: u64,
}

impl Default for BaselineNoise {
    fn default() -> Self {
        Self { xi_std: 0.1, seed: 0 }
    }
}

/// Draws applied to a ground-truth model, kept so a perturbation can be
/// replayed or inspected.
#[derive(Debug, Clone, PartialEq)]
pub enum Perturbation {
    None,
    /// Radius offset (m).
    Radius(f64),
    /// Direction tilt by `angle` radians about the unit `axis`.
    Tilt { angle: f64, axis: Vector3<f64> },
    /// Offsets (m) of control points 1.. in board coordinates.
    Control(Vec<Vector2<f64>>),
    /// Radius and pitch offsets (m). Helical noise extends the revolute rule.
    Helical { radius: f64, pitch: f64 },
}

impl Perturbation {
    /// Whether this perturbation goes beyond the prismatic, revolute and
    /// Bézier noise rules.
    pub fn is_extension(&self) -> bool {
        matches!(self, Perturbation::Helical { .. })
    }
}

/// Draws a perturbation for `traj` from `rng`.
///
/// Draw order: revolute one ξ; prismatic ξ then a uniform azimuth of the
/// tilt axis; Bézier (ξx, ξy) per control point after the first; helical
/// radius ξ then pitch ξ.
pub fn draw_perturbation<R: Rng + ?Sized>(traj: &Trajectory, xi_std: f64, rng: &mut R) -> Perturbation {
    let mut xi = || -> f64 {
        let n: f64 = StandardNormal.sample(rng);
        n * xi_std
    };
    match traj.kind() {
        JointKind::Revolute { .. } => Perturbation::Radius(xi()),
        JointKind::Prismatic { direction, .. } => {
            let angle = xi();
            let azimuth = rng.random::<f64>() * 2.0 * PI;
            let p1 = any_perpendicular(direction);
            let p2 = direction.cross(&p1);
            let axis = p1 * Float::cos(azimuth) + p2 * Float::sin(azimuth);
            Perturbation::Tilt { angle, axis }
        }
        JointKind::Bezier { control, .. } => {
            let offsets = (1..control.len())
                .map(|_| {
                    let x = xi();
                    let y = xi();
                    Vector2::new(x, y)
                })
                .collect();
            Perturbation::Control(offsets)
        }
        JointKind::Helical { .. } => {
            let radius = xi();
            let pitch = xi();
            Perturbation::Helical { radius, pitch }
        }
    }
}

fn move_axis(traj: &Trajectory, axis_point: &Vector3<f64>, axis_dir: &Vector3<f64>, delta_m: f64) -> Vector3<f64> {
    let h = traj.handle_rest_pose().translation();
    let rel = h - axis_point;
    let radial = rel - axis_dir * rel.dot(axis_dir);
    let r = radial.norm();
    if r == 0.0 {
        return *axis_point;
    }
    let target = (r + delta_m * MM_PER_M).max(MIN_RADIUS);
    axis_point + radial * ((r - target) / r)
}

/// Applies recorded draws to `traj`.
pub fn apply_perturbation(traj: &Trajectory, p: &Perturbation) -> Result<Trajectory, BaselineError> {
    let kind = match (traj.kind(), p) {
        (_, Perturbation::None) => return Ok(traj.clone()),
        (JointKind::Revolute { axis_point, axis_dir, span }, Perturbation::Radius(dr)) => JointKind::Revolute {
            axis_point: move_axis(traj, axis_point, axis_dir, *dr),
            axis_dir: *axis_dir,
            span: *span,
        },
        (JointKind::Prismatic { direction, length }, Perturbation::Tilt { angle, axis }) => JointKind::Prismatic {
            direction: (axis_angle_matrix(axis, *angle) * direction).normalize(),
            length: *length,
        },
        (JointKind::Bezier { control, board }, Perturbation::Control(offsets)) if offsets.len() + 1 == control.len() => {
            let mut moved = control.clone();
            for (c, o) in moved.iter_mut().skip(1).zip(offsets) {
                *c += o * MM_PER_M;
            }
            JointKind::Bezier {
                control: moved,
                board: *board,
            }
        }
        (
            JointKind::Helical {
                axis_point,
                axis_dir,
                span,
                pitch,
            },
            Perturbation::Helical { radius, pitch: dp },
        ) => JointKind::Helical {
            axis_point: move_axis(traj, axis_point, axis_dir, *radius),
            axis_dir: *axis_dir,
            span: *span,
            pitch: pitch + dp * MM_PER_M,
        },
        (kind, _) => return Err(BaselineError::UnsupportedKind(kind.name())),
    };
    Ok(traj.with_kind(kind))
}

/// Noisy copy of `traj`; `xi_std = 0` returns it unchanged.
pub fn perturb_model(traj: &Trajectory, noise: &BaselineNoise) -> Result<(Trajectory, Perturbation), BaselineError> {
    if !(noise.xi_std >= 0.0) {
        return Err(BaselineError::InvalidConfig("xi_std must be non-negative"));
    }
    if noise.xi_std == 0.0 {
        return Ok((traj.clone(), Perturbation::None));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let p = draw_perturbation(traj, noise.xi_std, &mut rng);
    Ok((apply_perturbation(traj, &p)?, p))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreplannedConfig {
    /// Arc-length step along the assumed path (mm).
    pub step: f64,
    /// Contact is lost once f_d exceeds this multiple of `deviation_bound`.
    pub lost_contact_factor: f64,
    pub deviation_bound: f64,
    pub max_iterations: usize,
    pub epsilon_policy: ContactPolicy,
}

impl Default for PreplannedConfig {
    fn default() -> Self {
        Self {
            step: 1.5,
            lost_contact_factor: 5.0,
            deviation_bound: 0.4,
            max_iterations: 10_000,
            epsilon_policy: ContactPolicy::default(),
        }
    }
}

impl PreplannedConfig {
    pub fn validate(&self) -> Result<(), BaselineError> {
        if !(self.step > 0.0 && self.lost_contact_factor > 0.0 && self.deviation_bound > 0.0) {
            return Err(BaselineError::InvalidConfig("step and bounds must be positive"));
        }
        Ok(())
    }
}

fn finish(world: &WorldState, criterion: &SuccessCriterion, steps: usize, failure: Option<FailureReason>, log: Vec<IterationRecord>) -> TrialResult {
    let mut result = TrialResult::score(&world.trajectory, criterion, world.s, failure);
    result.exec_steps = steps;
    result.iterations = steps;
    result.iteration_log = log;
    result
}

/// Replays the gripper motion implied by `assumed` without correcting from
/// touch; tactile readings only decide when contact is lost.
pub fn run_preplanned(
    world: &mut WorldState,
    sim: &SimConfig,
    cfg: &PreplannedConfig,
    assumed: &Trajectory,
    reference: &[ContactSet; PAD_COUNT],
    criterion: &SuccessCriterion,
) -> Result<TrialResult, BaselineError> {
    cfg.validate()?;
    let mut s_assumed = assumed.start();
    let grasp_offset = assumed.pose_unchecked(s_assumed).inverse().compose(&world.gripper_pose);
    let cap = cfg.lost_contact_factor * cfg.deviation_bound;
    let grids = sim.grids();
    let mut log = Vec::new();
    let mut steps = 0;
    loop {
        if criterion.is_met(&world.trajectory, world.s) {
            return Ok(finish(world, criterion, steps, None, log));
        }
        if s_assumed >= 1.0 {
            return Ok(finish(world, criterion, steps, Some(FailureReason::PathEnd), log));
        }
        if steps >= cfg.max_iterations {
            return Ok(finish(world, criterion, steps, Some(FailureReason::MaxIterations), log));
        }
        let speed = assumed.speed_at(s_assumed).max(1e-9);
        s_assumed = (s_assumed + (cfg.step / speed).min(0.01)).min(1.0);
        let target = assumed.pose_unchecked(s_assumed).compose(&grasp_offset);
        let delta = world.gripper_pose.inverse().compose(&target);
        step_gripper_in_place(world, sim, &delta)?;
        steps += 1;
        let summary = observe_averaged(world, sim, &cfg.epsilon_policy, sim.observation_frames)
            .ok()
            .and_then(|current| summarize_pads(&current, &grids, reference).ok());
        let Some(summary) = summary else {
            return Ok(finish(world, criterion, steps, Some(FailureReason::LostContact), log));
        };
        log.push(IterationRecord {
            iteration: steps,
            phase: Phase::Executing,
            s: world.s,
            summary,
            event: None,
        });
        if summary.mean_pair_distance > cap {
            return Ok(finish(world, criterion, steps, Some(FailureReason::LostContact), log));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplianceConfig {
    /// Largest tolerated handle offset from the commanded line (mm).
    pub lateral_compliance_limit: f64,
    /// Commanded step along the line (mm).
    pub step: f64,
    pub max_iterations: usize,
}

impl Default for ComplianceConfig {
    fn default() -> Self {
        Self {
            lateral_compliance_limit: 15.0,
            step: 1.5,
            max_iterations: 10_000,
        }
    }
}

impl ComplianceConfig {
    pub fn validate(&self) -> Result<(), BaselineError> {
        if !(self.lateral_compliance_limit > 0.0 && self.step > 0.0) {
            return Err(BaselineError::InvalidConfig("compliance limit and step must be positive"));
        }
        Ok(())
    }
}

/// Pushes along a fixed world `direction` with fixed gripper orientation.
/// The wrist gives way sideways to follow the handle until the handle strays
/// farther than the compliance limit from the commanded line.
pub fn run_compliant(
    world: &mut WorldState,
    sim: &SimConfig,
    direction: &Vector3<f64>,
    cfg: &ComplianceConfig,
    criterion: &SuccessCriterion,
) -> Result<TrialResult, BaselineError> {
    cfg.validate()?;
    let norm = direction.norm();
    if !(norm > 0.0) {
        return Err(BaselineError::InvalidConfig("direction must be non-zero"));
    }
    let dir = direction / norm;
    let origin = *world.gripper_pose.translation();
    let grasp_offset = world.handle_pose().inverse().compose(&world.gripper_pose);
    let mut steps = 0;
    loop {
        if criterion.is_met(&world.trajectory, world.s) {
            return Ok(finish(world, criterion, steps, None, Vec::new()));
        }
        if steps >= cfg.max_iterations {
            return Ok(finish(world, criterion, steps, Some(FailureReason::MaxIterations), Vec::new()));
        }
        let push = world.gripper_pose.rotation().transpose() * (dir * cfg.step);
        step_gripper_in_place(world, sim, &Pose::from_translation(push))?;
        steps += 1;

        let held = world.handle_pose().compose(&grasp_offset);
        let from_line = held.translation() - origin;
        let lateral = from_line - dir * from_line.dot(&dir);
        if lateral.norm() > cfg.lateral_compliance_limit {
            return Ok(finish(world, criterion, steps, Some(FailureReason::ComplianceLimit), Vec::new()));
        }
        let gripper_off = world.gripper_pose.translation() - origin;
        let shift = lateral - (gripper_off - dir * gripper_off.dot(&dir));
        let recenter = world.gripper_pose.rotation().transpose() * shift;
        step_gripper_in_place(world, sim, &Pose::from_translation(recenter))?;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::grasp;

    fn door(r: f64) -> Trajectory {
        Trajectory::revolute(Pose::identity(), Vector3::new(-r, 0.0, 0.0), Vector3::new(0.0, 0.0, -1.0), PI / 2.0).unwrap()
    }

    fn drawer() -> Trajectory {
        Trajectory::prismatic(Pose::identity(), Vector3::new(0.0, -1.0, 0.0), 300.0).unwrap()
    }

    #[test]
    fn zero_noise_is_identity() {
        let noise = BaselineNoise { xi_std: 0.0, seed: 3 };
        for t in [door(400.0), drawer()] {
            assert_eq!(perturb_model(&t, &noise).unwrap().0, t);
        }
    }

    #[test]
    fn fixed_radius_draw() {
        let t = door(400.0);
        let p = apply_perturbation(&t, &Perturbation::Radius(0.04)).unwrap();
        assert!((p.radius().unwrap() - 440.0).abs() < 1e-9);
        assert_eq!(p.handle_rest_pose(), t.handle_rest_pose());
    }

    #[test]
    fn tilt_keeps_unit_direction() {
        let t = drawer();
        let (p, draw) = perturb_model(&t, &BaselineNoise { xi_std: 0.1, seed: 9 }).unwrap();
        let (JointKind::Prismatic { direction: a, .. }, JointKind::Prismatic { direction: b, .. }) = (t.kind(), p.kind()) else {
            panic!("kind changed");
        };
        let Perturbation::Tilt { angle, axis } = draw else { panic!("wrong draw") };
        assert!((b.norm() - 1.0).abs() < 1e-12);
        assert!(axis.dot(a).abs() < 1e-12);
        assert!((a.dot(b).clamp(-1.0, 1.0).acos() - angle.abs()).abs() < 1e-9);
    }

    #[test]
    fn helical_draw_is_flagged() {
        let t = Trajectory::helical(Pose::identity(), Vector3::new(-50.0, 0.0, 0.0), Vector3::z(), 2.0 * PI, 20.0).unwrap();
        let (_, p) = perturb_model(&t, &BaselineNoise { xi_std: 0.01, seed: 1 }).unwrap();
        assert!(p.is_extension());
    }

    #[test]
    fn exact_prior_opens_drawer() {
        let sim = SimConfig::noise_free();
        let world = WorldState::new(drawer(), 2);
        let pose = *world.trajectory.handle_rest_pose();
        let (mut world, reference) = grasp(&world, &sim, &pose).unwrap();
        let criterion = SuccessCriterion::default_for(&world.trajectory);
        let assumed = world.trajectory.clone();
        let r = run_preplanned(&mut world, &sim, &PreplannedConfig::default(), &assumed, &reference, &criterion).unwrap();
        assert!(r.success, "{:?}", r.failure);
        assert_eq!(r.sr_w, 100.0);
    }

    #[test]
    fn compliant_follower_opens_drawer() {
        let sim = SimConfig::noise_free();
        let world = WorldState::new(drawer(), 2);
        let pose = *world.trajectory.handle_rest_pose();
        let (mut world, _) = grasp(&world, &sim, &pose).unwrap();
        let criterion = SuccessCriterion::default_for(&world.trajectory);
        let r = run_compliant(&mut world, &sim, &Vector3::new(0.0, -1.0, 0.0), &ComplianceConfig::default(), &criterion).unwrap();
        assert!(r.success, "{:?}", r.failure);
    }

    #[test]
    fn compliant_follower_loses_door() {
        let sim = SimConfig::noise_free();
        let world = WorldState::new(door(400.0), 2);
        let pose = *world.trajectory.handle_rest_pose();
        let (mut world, _) = grasp(&world, &sim, &pose).unwrap();
        let criterion = SuccessCriterion::default_for(&world.trajectory);
        let r = run_compliant(&mut world, &sim, &Vector3::new(0.0, -1.0, 0.0), &ComplianceConfig::default(), &criterion).unwrap();
        assert_eq!(r.failure, Some(FailureReason::ComplianceLimit));
        assert!(r.sr_w < 100.0);
    }
}
