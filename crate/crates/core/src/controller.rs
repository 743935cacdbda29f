//! Execute/recover loop.
//!
//! Execution pushes the gripper in fixed increments along the preliminary
//! direction until any contact metric reaches its α-scaled bound. Recovery
//! then registers the current contact onto the reference contact recorded at
//! grasp and commands the inverse of that registration, repeating until the
//! contact deviation is comfortably inside its bound.

use alloc::vec::Vec;
use core::fmt;

use nalgebra::Vector3;

use crate::articulation::Trajectory;
use crate::contact::{summarize_pads, ContactSet, DeviationSummary};
use crate::kabsch::kabsch_pairs;
use crate::metrics::{actual_distance, weighted_success, SuccessCriterion};
use crate::se3::{axis_angle_matrix, rotation_between, AugmentedPoint, Pose};
use crate::sim::{observe_averaged, step_gripper_in_place, ContactPolicy, SimConfig, SimError, WorldState, PAD_COUNT};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ControllerError {
    #[error("invalid controller config: {0}")]
    InvalidConfig(&'static str),
    #[error("stage called in phase {0:?}")]
    WrongPhase(Phase),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Why a trial ended without success.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FailureReason {
    GraspFailed,
    LostContact,
    ConstraintBlown,
    RecoveryStalled,
    DegenerateCorrespondences,
    MaxIterations,
    ComplianceLimit,
    PathEnd,
}

impl FailureReason {
    pub const ALL: [FailureReason; 8] = [
        Self::GraspFailed,
        Self::LostContact,
        Self::ConstraintBlown,
        Self::RecoveryStalled,
        Self::DegenerateCorrespondences,
        Self::MaxIterations,
        Self::ComplianceLimit,
        Self::PathEnd,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::GraspFailed => "GraspFailed",
            Self::LostContact => "LostContact",
            Self::ConstraintBlown => "ConstraintBlown",
            Self::RecoveryStalled => "RecoveryStalled",
            Self::DegenerateCorrespondences => "DegenerateCorrespondences",
            Self::MaxIterations => "MaxIterations",
            Self::ComplianceLimit => "ComplianceLimit",
            Self::PathEnd => "PathEnd",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|r| r.as_str() == s)
    }
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Executing,
    Recovering,
    Done,
    Failed(FailureReason),
}

impl Phase {
    pub fn is_terminal(&self) -> bool {
        matches!(self, Phase::Done | Phase::Failed(_))
    }
}

/// Contact metric that can bind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Normal,
    Shear,
    Slip,
    Deviation,
}

/// Stable-contact bounds on the four contact metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactBounds {
    pub normal: f64,
    pub shear: f64,
    pub slip: f64,
    pub deviation: f64,
}

impl ContactBounds {
    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            normal: self.normal * alpha,
            shear: self.shear * alpha,
            slip: self.slip * alpha,
            deviation: self.deviation * alpha,
        }
    }

    /// First metric that reaches its bound, checked in a fixed order.
    pub fn reached(&self, s: &DeviationSummary) -> Option<Metric> {
        if s.max_normal >= self.normal {
            Some(Metric::Normal)
        } else if s.max_shear >= self.shear {
            Some(Metric::Shear)
        } else if s.max_slip_ratio >= self.slip {
            Some(Metric::Slip)
        } else if s.mean_pair_distance >= self.deviation {
            Some(Metric::Deviation)
        } else {
            None
        }
    }

    /// First metric strictly beyond its bound.
    pub fn exceeded(&self, s: &DeviationSummary) -> Option<Metric> {
        if s.max_normal > self.normal {
            Some(Metric::Normal)
        } else if s.max_shear > self.shear {
            Some(Metric::Shear)
        } else if s.max_slip_ratio > self.slip {
            Some(Metric::Slip)
        } else if s.mean_pair_distance > self.deviation {
            Some(Metric::Deviation)
        } else {
            None
        }
    }

    pub fn value(s: &DeviationSummary, metric: Metric) -> f64 {
        match metric {
            Metric::Normal => s.max_normal,
            Metric::Shear => s.max_shear,
            Metric::Slip => s.max_slip_ratio,
            Metric::Deviation => s.mean_pair_distance,
        }
    }

    pub fn bound(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Normal => self.normal,
            Metric::Shear => self.shear,
            Metric::Slip => self.slip,
            Metric::Deviation => self.deviation,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub epsilon_policy: ContactPolicy,
    /// Normal elastic limit e_n (mm).
    pub e_n: f64,
    /// Shear elastic limit e_s (mm).
    pub e_s: f64,
    /// Slip threshold δ0 on ΔS/ΔN.
    pub delta0: f64,
    /// Contact deviation bound d (mm).
    pub d: f64,
    pub alpha: f64,
    /// Execution step (mm); `None` uses ε·δ0 of the reference contact.
    pub exec_increment: Option<f64>,
    /// Budget of commanded gripper steps.
    pub max_iterations: usize,
    pub fail_violation_streak: usize,
    pub recovery_rounds: usize,
    /// Recovery exits once f_d ≤ this fraction of the `(1 − α)·d` margin.
    pub recovery_exit_fraction: f64,
    /// Minimum relative f_d reduction per recovery round.
    pub min_recovery_reduction: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            epsilon_policy: ContactPolicy::default(),
            e_n: 2.0,
            e_s: 3.0,
            delta0: 1.5,
            d: 0.4,
            alpha: 0.6,
            exec_increment: None,
            max_iterations: 10_000,
            fail_violation_streak: 5,
            recovery_rounds: 10,
            recovery_exit_fraction: 0.5,
            min_recovery_reduction: 0.05,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), ControllerError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(ControllerError::InvalidConfig("alpha must lie in (0, 1)"));
        }
        if !(self.e_n > 0.0 && self.e_s > 0.0 && self.d > 0.0) {
            return Err(ControllerError::InvalidConfig("elastic limits and deviation bound must be positive"));
        }
        if !(self.delta0 > 0.0) {
            return Err(ControllerError::InvalidConfig("slip threshold must be positive"));
        }
        if let Some(inc) = self.exec_increment {
            if !(inc > 0.0 && inc.is_finite()) {
                return Err(ControllerError::InvalidConfig("execution increment must be positive"));
            }
        }
        if self.fail_violation_streak == 0 || self.recovery_rounds == 0 {
            return Err(ControllerError::InvalidConfig("streak and round counts must be positive"));
        }
        if !(self.recovery_exit_fraction > 0.0 && self.recovery_exit_fraction <= 1.0) {
            return Err(ControllerError::InvalidConfig("recovery exit fraction must lie in (0, 1]"));
        }
        if !(0.0..1.0).contains(&self.min_recovery_reduction) {
            return Err(ControllerError::InvalidConfig("recovery reduction must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn raw_bounds(&self) -> ContactBounds {
        ContactBounds {
            normal: self.e_n,
            shear: self.e_s,
            slip: self.delta0,
            deviation: self.d,
        }
    }

    pub fn boundary(&self) -> ContactBounds {
        self.raw_bounds().scaled(self.alpha)
    }

    pub fn recovery_exit(&self) -> f64 {
        self.recovery_exit_fraction * (1.0 - self.alpha) * self.d
    }
}

/// Noteworthy transition attached to an iteration record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Event {
    /// An α-scaled bound was reached; recovery follows.
    Boundary(Metric),
    /// Recovery finished at this deviation.
    RecoveryExit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Stage that commanded this step.
    pub phase: Phase,
    /// Handle parameter after the step.
    pub s: f64,
    pub summary: DeviationSummary,
    pub event: Option<Event>,
}

/// Mutable state of one controlled trial.
#[derive(Debug, Clone)]
pub struct ControllerState {
    direction: Vector3<f64>,
    reference: [ContactSet; PAD_COUNT],
    exec_increment: f64,
    pub phase: Phase,
    pub iteration_log: Vec<IterationRecord>,
    /// f_d at every recovery exit.
    pub recovery_exits: Vec<f64>,
    pub iterations: usize,
    pub exec_steps: usize,
    pub recover_steps: usize,
    pub cycles: usize,
    violation_streak: usize,
    current: Option<[ContactSet; PAD_COUNT]>,
    last_summary: Option<DeviationSummary>,
}

impl ControllerState {
    /// `direction` is the preliminary direction in the gripper frame.
    pub fn new(reference: [ContactSet; PAD_COUNT], direction: Vector3<f64>, cfg: &ControllerConfig) -> Result<Self, ControllerError> {
        cfg.validate()?;
        let norm = direction.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(ControllerError::InvalidConfig("preliminary direction must be a non-zero vector"));
        }
        let epsilon = reference.iter().map(|c| c.epsilon_used).fold(f64::INFINITY, f64::min);
        let exec_increment = cfg.exec_increment.unwrap_or(epsilon * cfg.delta0);
        Ok(Self {
            direction: direction / norm,
            reference,
            exec_increment,
            phase: Phase::Executing,
            iteration_log: Vec::new(),
            recovery_exits: Vec::new(),
            iterations: 0,
            exec_steps: 0,
            recover_steps: 0,
            cycles: 0,
            violation_streak: 0,
            current: None,
            last_summary: None,
        })
    }

    pub fn direction(&self) -> &Vector3<f64> {
        &self.direction
    }

    /// Rotation taking the gripper x axis onto the preliminary direction.
    pub fn preliminary_rotation(&self) -> nalgebra::Matrix3<f64> {
        rotation_between(&Vector3::x(), &self.direction)
    }

    pub fn reference(&self) -> &[ContactSet; PAD_COUNT] {
        &self.reference
    }

    pub fn exec_increment(&self) -> f64 {
        self.exec_increment
    }

    fn fail(&mut self, reason: FailureReason) {
        self.phase = Phase::Failed(reason);
    }

    /// Observes, records and screens one step. Returns `None` when the trial
    /// has failed.
    fn observe_step(&mut self, world: &mut WorldState, sim: &SimConfig, cfg: &ControllerConfig, phase: Phase) -> Option<DeviationSummary> {
        let current = match observe_averaged(world, sim, &cfg.epsilon_policy, sim.observation_frames) {
            Ok(c) => c,
            Err(_) => {
                self.fail(FailureReason::LostContact);
                return None;
            }
        };
        let summary = match summarize_pads(&current, &sim.grids(), &self.reference) {
            Ok(s) => s,
            Err(_) => {
                self.fail(FailureReason::LostContact);
                return None;
            }
        };
        self.iteration_log.push(IterationRecord {
            iteration: self.iterations,
            phase,
            s: world.s,
            summary,
            event: None,
        });
        self.current = Some(current);
        self.last_summary = Some(summary);
        if cfg.raw_bounds().exceeded(&summary).is_some() {
            self.violation_streak += 1;
            if self.violation_streak >= cfg.fail_violation_streak {
                self.fail(FailureReason::ConstraintBlown);
                return None;
            }
        } else {
            self.violation_streak = 0;
        }
        Some(summary)
    }

    fn tag_last(&mut self, event: Event) {
        if let Some(rec) = self.iteration_log.last_mut() {
            rec.event = Some(event);
        }
    }

    fn budget_left(&self, cfg: &ControllerConfig) -> bool {
        self.iterations < cfg.max_iterations
    }
}

/// Unit vector from the handle position at the start toward its position a
/// little further along, in the gripper frame.
pub fn default_preliminary_direction(traj: &Trajectory, gripper_pose: &Pose) -> Vector3<f64> {
    let s0 = traj.start();
    let s1 = (s0 + 0.01).min(1.0);
    let a = traj.pose_unchecked(s0).translation().clone_owned();
    let b = traj.pose_unchecked(s1).translation().clone_owned();
    let world = b - a;
    let local = gripper_pose.rotation().transpose() * world;
    if local.norm() > 0.0 {
        local.normalize()
    } else {
        Vector3::y()
    }
}

/// `direction` rotated by `angle` about `axis`.
pub fn misalign(direction: &Vector3<f64>, axis: &Vector3<f64>, angle: f64) -> Vector3<f64> {
    axis_angle_matrix(axis, angle) * direction
}

/// Incremental execution until an α-scaled bound is reached.
pub fn execute_stage(
    world: &mut WorldState,
    sim: &SimConfig,
    cfg: &ControllerConfig,
    state: &mut ControllerState,
    criterion: &SuccessCriterion,
) -> Result<(), ControllerError> {
    if state.phase != Phase::Executing {
        return Err(ControllerError::WrongPhase(state.phase));
    }
    let step = Pose::from_translation(state.direction * state.exec_increment);
    let boundary = cfg.boundary();
    loop {
        if !state.budget_left(cfg) {
            state.fail(FailureReason::MaxIterations);
            return Ok(());
        }
        step_gripper_in_place(world, sim, &step)?;
        state.iterations += 1;
        state.exec_steps += 1;
        let Some(summary) = state.observe_step(world, sim, cfg, Phase::Executing) else {
            return Ok(());
        };
        if criterion.is_met(&world.trajectory, world.s) {
            state.phase = Phase::Done;
            return Ok(());
        }
        if let Some(metric) = boundary.reached(&summary) {
            state.tag_last(Event::Boundary(metric));
            state.cycles += 1;
            state.phase = Phase::Recovering;
            return Ok(());
        }
    }
}

/// Corresponded `(current, reference)` marker pairs of both pads expressed
/// in the gripper frame.
pub fn pooled_pairs(sim: &SimConfig, current: &[ContactSet; PAD_COUNT], reference: &[ContactSet; PAD_COUNT]) -> Vec<(AugmentedPoint, AugmentedPoint)> {
    let mut pairs = Vec::new();
    for pad in 0..PAD_COUNT {
        let mount = sim.pad_mount(pad);
        for (_, u, v) in current[pad].pairs_with(&reference[pad]) {
            pairs.push((mount.transform_point(&u), mount.transform_point(&v)));
        }
    }
    pairs
}

/// Rigid corrections until the contact deviation is back inside its band.
pub fn recover_stage(
    world: &mut WorldState,
    sim: &SimConfig,
    cfg: &ControllerConfig,
    state: &mut ControllerState,
    criterion: &SuccessCriterion,
) -> Result<(), ControllerError> {
    if state.phase != Phase::Recovering {
        return Err(ControllerError::WrongPhase(state.phase));
    }
    let exit = cfg.recovery_exit();
    let mut deviation = match state.last_summary {
        Some(s) => s.mean_pair_distance,
        None => match state.observe_step(world, sim, cfg, Phase::Recovering) {
            Some(s) => s.mean_pair_distance,
            None => return Ok(()),
        },
    };
    for _ in 0..cfg.recovery_rounds {
        if deviation <= exit {
            break;
        }
        if !state.budget_left(cfg) {
            state.fail(FailureReason::MaxIterations);
            return Ok(());
        }
        let Some(current) = state.current.as_ref() else {
            state.fail(FailureReason::LostContact);
            return Ok(());
        };
        let pairs = pooled_pairs(sim, current, &state.reference);
        let correction = match kabsch_pairs(&pairs) {
            Ok(t) => t,
            Err(_) => {
                state.fail(FailureReason::DegenerateCorrespondences);
                return Ok(());
            }
        };
        step_gripper_in_place(world, sim, &correction.inverse())?;
        state.iterations += 1;
        state.recover_steps += 1;
        let Some(summary) = state.observe_step(world, sim, cfg, Phase::Recovering) else {
            return Ok(());
        };
        let next = summary.mean_pair_distance;
        if criterion.is_met(&world.trajectory, world.s) {
            state.phase = Phase::Done;
            return Ok(());
        }
        let stalled = next > (1.0 - cfg.min_recovery_reduction) * deviation;
        deviation = next;
        if stalled && deviation > exit {
            break;
        }
    }
    if deviation <= cfg.d {
        state.tag_last(Event::RecoveryExit);
        state.recovery_exits.push(deviation);
        state.phase = Phase::Executing;
    } else {
        state.fail(FailureReason::RecoveryStalled);
    }
    Ok(())
}

/// Outcome of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub success: bool,
    pub d_expected: f64,
    pub d_actual: f64,
    pub sr_w: f64,
    pub cycles: usize,
    pub exec_steps: usize,
    pub recover_steps: usize,
    pub iterations: usize,
    pub failure: Option<FailureReason>,
    pub final_s: f64,
    pub iteration_log: Vec<IterationRecord>,
    pub recovery_exits: Vec<f64>,
}

impl TrialResult {
    /// Result scored from the handle's final parameter.
    pub fn score(traj: &Trajectory, criterion: &SuccessCriterion, final_s: f64, failure: Option<FailureReason>) -> Self {
        let d_expected = criterion.expected_distance(traj);
        let d_actual = actual_distance(traj, final_s);
        let success = failure.is_none() && criterion.is_met(traj, final_s);
        Self {
            success,
            d_expected,
            d_actual,
            sr_w: weighted_success(d_actual, d_expected).unwrap_or(0.0),
            cycles: 0,
            exec_steps: 0,
            recover_steps: 0,
            iterations: 0,
            failure: if success { None } else { Some(failure.unwrap_or(FailureReason::MaxIterations)) },
            final_s,
            iteration_log: Vec::new(),
            recovery_exits: Vec::new(),
        }
    }

    /// Result of a trial that never started moving.
    pub fn not_started(traj: &Trajectory, criterion: &SuccessCriterion, failure: FailureReason) -> Self {
        Self::score(traj, criterion, traj.start(), Some(failure))
    }
}

/// Alternates execution and recovery until success, failure or the
/// iteration budget runs out.
pub fn run(
    world: &mut WorldState,
    sim: &SimConfig,
    cfg: &ControllerConfig,
    state: &mut ControllerState,
    criterion: &SuccessCriterion,
) -> Result<TrialResult, ControllerError> {
    cfg.validate()?;
    while !state.phase.is_terminal() {
        match state.phase {
            Phase::Executing => execute_stage(world, sim, cfg, state, criterion)?,
            Phase::Recovering => recover_stage(world, sim, cfg, state, criterion)?,
            Phase::Done | Phase::Failed(_) => {}
        }
    }
    let failure = match state.phase {
        Phase::Failed(reason) => Some(reason),
        _ => None,
    };
    let mut result = TrialResult::score(&world.trajectory, criterion, world.s, failure);
    result.cycles = state.cycles;
    result.exec_steps = state.exec_steps;
    result.recover_steps = state.recover_steps;
    result.iterations = state.iterations;
    result.iteration_log = core::mem::take(&mut state.iteration_log);
    result.recovery_exits = core::mem::take(&mut state.recovery_exits);
    Ok(result)
}
