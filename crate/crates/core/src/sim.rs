//! Quasi-static world: a two-pad gripper holding a handle that is confined
//! to a one-DoF trajectory.
//!
//! At grasp time the markers touching the handle patch are glued to the
//! handle frame, pre-compressed by the commanded grasp depth. Afterwards the
//! handle never moves on its own: every gripper motion is followed by a
//! relaxation step that places the handle at the trajectory parameter
//! minimizing the elastic energy of the glued markers. Slip is not enacted;
//! glued markers never re-bind.

use alloc::vec::Vec;

use nalgebra::Vector3;
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::articulation::Trajectory;
use crate::contact::{detect_contact, ContactError, ContactSet, EpsilonLadder, MarkerGrid, MarkerId};
use crate::se3::{AugmentedPoint, Pose};

pub const PAD_COUNT: usize = 2;

/// Raw marker positions of both pads, in their pad frames.
pub type MarkerObservation = [Vec<(MarkerId, AugmentedPoint)>; PAD_COUNT];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("grasp failed: pad {pad} touches {affixed} markers, {required} required")]
    GraspFailed { pad: usize, affixed: usize, required: usize },
    #[error("gripper has not grasped the handle")]
    NotGrasped,
    #[error("handle already grasped")]
    AlreadyGrasped,
    #[error("handle must be at its start parameter to grasp")]
    NotAtStart,
    #[error("invalid sim config: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Contact(#[from] ContactError),
}

/// Adaptive contact-threshold policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactPolicy {
    pub ladder: EpsilonLadder,
    pub min_points: usize,
}

/// Members demanded of a contact set by default: most of the 8 × 6 marker
/// patch the default handle face presses into each pad.
pub const DEFAULT_MIN_POINTS: usize = 36;

impl Default for ContactPolicy {
    fn default() -> Self {
        Self {
            ladder: EpsilonLadder::default(),
            min_points: DEFAULT_MIN_POINTS,
        }
    }
}

impl ContactPolicy {
    /// Default ladder; `min_points` one more than the longest grid line.
    pub fn for_grid(n_res: usize) -> Self {
        Self {
            ladder: EpsilonLadder::default(),
            min_points: n_res.max(7) + 1,
        }
    }
}

/// Flat graspable face pair of the handle: a slab `2·half_thickness` thick
/// whose faces are `length × height` rectangles (handle-frame y × z).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandlePatch {
    pub half_thickness: f64,
    pub length: f64,
    pub height: f64,
}

impl Default for HandlePatch {
    fn default() -> Self {
        Self {
            half_thickness: 10.0,
            length: 30.0,
            height: 20.0,
        }
    }
}

impl HandlePatch {
    /// Euclidean distance from a handle-frame point to the slab.
    pub fn distance(&self, p: &Vector3<f64>) -> f64 {
        let dx = (p.x.abs() - self.half_thickness).max(0.0);
        let dy = (p.y.abs() - self.length * 0.5).max(0.0);
        let dz = (p.z.abs() - self.height * 0.5).max(0.0);
        Float::sqrt(dx * dx + dy * dy + dz * dz)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Markers per grid side.
    pub n_res: usize,
    /// Marker spacing (mm).
    pub marker_pitch: f64,
    /// Distance below which a marker is glued to the handle at grasp (mm).
    pub sim_epsilon: f64,
    /// Per-frame sensor noise standard deviation (mm).
    pub zeta: f64,
    /// Initial normal compression imprinted on glued markers (mm).
    pub grasp_depth: f64,
    /// Golden-section tolerance on the handle parameter.
    pub handle_solver_tolerance: f64,
    /// Half-width of the handle relaxation window, in mm of handle travel.
    pub trust_region: f64,
    /// Pad surfaces sit at gripper x = ±pad_offset (mm).
    pub pad_offset: f64,
    pub handle: HandlePatch,
    pub contact: ContactPolicy,
    /// Frames averaged into the reference contact recorded at grasp.
    pub reference_frames: u32,
    /// Frames averaged into each observation used for control.
    pub observation_frames: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_res: 10,
            marker_pitch: 4.0,
            sim_epsilon: 0.25,
            zeta: 2.0,
            grasp_depth: 1.0,
            handle_solver_tolerance: 1e-7,
            trust_region: 7.5,
            pad_offset: 10.0,
            handle: HandlePatch::default(),
            contact: ContactPolicy::default(),
            reference_frames: 1 << 16,
            observation_frames: 1 << 13,
        }
    }
}

impl SimConfig {
    pub fn noise_free() -> Self {
        Self {
            zeta: 0.0,
            ..Self::default()
        }
    }

    /// Checks positivity and that the grasp depth stays below `normal_limit`.
    pub fn validate(&self, normal_limit: f64) -> Result<(), SimError> {
        if self.n_res < 2 {
            return Err(SimError::InvalidConfig("n_res must be at least 2"));
        }
        let positive = [
            self.marker_pitch,
            self.sim_epsilon,
            self.grasp_depth,
            self.handle_solver_tolerance,
            self.trust_region,
            self.handle.half_thickness,
            self.handle.length,
            self.handle.height,
        ];
        if !positive.iter().all(|v| *v > 0.0 && v.is_finite()) {
            return Err(SimError::InvalidConfig("lengths and tolerances must be positive"));
        }
        if !(self.zeta >= 0.0) {
            return Err(SimError::InvalidConfig("zeta must be non-negative"));
        }
        if self.grasp_depth >= normal_limit {
            return Err(SimError::InvalidConfig("grasp depth must stay below the normal elastic limit"));
        }
        if self.reference_frames == 0 || self.observation_frames == 0 {
            return Err(SimError::InvalidConfig("frame counts must be positive"));
        }
        Ok(())
    }

    pub fn grid(&self, pad: usize) -> MarkerGrid {
        MarkerGrid::square(self.n_res, self.marker_pitch, pad as u8)
    }

    pub fn grids(&self) -> [MarkerGrid; PAD_COUNT] {
        [self.grid(0), self.grid(1)]
    }

    /// Pad frame in the gripper frame. Pad x points into the pad body so
    /// compression reads as positive ΔN.
    pub fn pad_mount(&self, pad: usize) -> Pose {
        match pad {
            0 => Pose::rot_z(core::f64::consts::PI).with_translation(Vector3::new(-self.pad_offset, 0.0, 0.0)),
            _ => Pose::from_translation(Vector3::new(self.pad_offset, 0.0, 0.0)),
        }
    }

    pub fn pad_mounts(&self) -> [Pose; PAD_COUNT] {
        [self.pad_mount(0), self.pad_mount(1)]
    }

    /// Largest distance from the gripper origin to any marker (mm).
    pub fn pad_reach(&self) -> f64 {
        let half = (self.n_res as f64 - 1.0) * 0.5 * self.marker_pitch;
        Float::sqrt(self.pad_offset * self.pad_offset + 2.0 * half * half)
    }
}

/// Complete simulation state of one trial.
#[derive(Debug, Clone)]
pub struct WorldState {
    pub trajectory: Trajectory,
    /// Current handle parameter.
    pub s: f64,
    pub gripper_pose: Pose,
    /// Per pad: glued markers in the handle frame. Empty until grasped.
    pub affixed_contacts: [Vec<(MarkerId, AugmentedPoint)>; PAD_COUNT],
    pub rng: ChaCha8Rng,
}

impl WorldState {
    /// Handle at its start parameter; gripper parked at the handle pose.
    pub fn new(trajectory: Trajectory, seed: u64) -> Self {
        let s = trajectory.start();
        let gripper_pose = *trajectory.handle_rest_pose();
        Self {
            trajectory,
            s,
            gripper_pose,
            affixed_contacts: [Vec::new(), Vec::new()],
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn is_grasped(&self) -> bool {
        self.affixed_contacts.iter().all(|a| !a.is_empty())
    }

    pub fn handle_pose(&self) -> Pose {
        self.trajectory.pose_unchecked(self.s)
    }

    /// Handle pose expressed in the gripper frame.
    pub fn handle_in_gripper(&self) -> Pose {
        self.gripper_pose.inverse().compose(&self.handle_pose())
    }

    /// Noise-free marker positions in each pad frame at handle parameter `s`.
    fn marker_positions(&self, cfg: &SimConfig, s: f64) -> MarkerObservation {
        let handle = self.trajectory.pose_unchecked(s);
        let mut out: MarkerObservation = [Vec::new(), Vec::new()];
        for (pad, slot) in out.iter_mut().enumerate() {
            let to_pad = self.gripper_pose.compose(&cfg.pad_mount(pad)).inverse().compose(&handle);
            let grid = cfg.grid(pad);
            let mut points: Vec<(MarkerId, AugmentedPoint)> = grid.as_observation();
            for (id, p) in &self.affixed_contacts[pad] {
                points[id.index()].1 = to_pad.transform_point(p);
            }
            *slot = points;
        }
        out
    }

    /// Elastic energy of the glued markers with the handle at parameter `s`.
    pub fn energy_at(&self, cfg: &SimConfig, s: f64) -> f64 {
        let handle = self.trajectory.pose_unchecked(s);
        let mut e = 0.0;
        for pad in 0..PAD_COUNT {
            let to_pad = self.gripper_pose.compose(&cfg.pad_mount(pad)).inverse().compose(&handle);
            let grid = cfg.grid(pad);
            for (id, p) in &self.affixed_contacts[pad] {
                let rest = grid.markers()[id.index()];
                e += (to_pad.transform_point(p).0 - rest.0).norm_squared();
            }
        }
        e
    }

    pub fn energy(&self, cfg: &SimConfig) -> f64 {
        self.energy_at(cfg, self.s)
    }
}

/// Glues markers within `sim_epsilon` of the handle patch and records the
/// reference contact.
pub fn grasp(world: &WorldState, cfg: &SimConfig, grasp_pose: &Pose) -> Result<(WorldState, [ContactSet; PAD_COUNT]), SimError> {
    if world.is_grasped() || world.affixed_contacts.iter().any(|a| !a.is_empty()) {
        return Err(SimError::AlreadyGrasped);
    }
    if world.s != world.trajectory.start() {
        return Err(SimError::NotAtStart);
    }
    let mut next = world.clone();
    next.gripper_pose = *grasp_pose;
    let handle_inv = world.handle_pose().inverse();
    let required = cfg.contact.min_points.max(8);
    for pad in 0..PAD_COUNT {
        let pad_pose = grasp_pose.compose(&cfg.pad_mount(pad));
        let to_handle = handle_inv.compose(&pad_pose);
        let grid = cfg.grid(pad);
        let glued: Vec<(MarkerId, AugmentedPoint)> = grid
            .ids()
            .zip(grid.markers())
            .filter(|(_, m)| cfg.handle.distance(&to_handle.transform_point(m).0) < cfg.sim_epsilon)
            .map(|(id, m)| {
                let pressed = AugmentedPoint::new(m.x() + cfg.grasp_depth, m.y(), m.z());
                (id, to_handle.transform_point(&pressed))
            })
            .collect();
        if glued.len() < required {
            return Err(SimError::GraspFailed {
                pad,
                affixed: glued.len(),
                required,
            });
        }
        next.affixed_contacts[pad] = glued;
    }
    let raw = observe_markers(&mut next, cfg, cfg.reference_frames)?;
    let detect = |pad: usize| {
        detect_contact(&cfg.grid(pad), &raw[pad], cfg.contact.min_points, &cfg.contact.ladder).map_err(|e| match e {
            ContactError::NoContact { found, .. } => SimError::GraspFailed {
                pad,
                affixed: found,
                required,
            },
            other => SimError::Contact(other),
        })
    };
    let reference = [detect(0)?, detect(1)?];
    Ok((next, reference))
}

/// Marker positions in both pad frames with Gaussian noise whose standard
/// deviation is `ζ / √frames`: the exact distribution of the mean of
/// `frames` independent single-frame observations.
pub fn observe_markers(world: &mut WorldState, cfg: &SimConfig, frames: u32) -> Result<MarkerObservation, SimError> {
    if !world.is_grasped() {
        return Err(SimError::NotGrasped);
    }
    let mut obs = world.marker_positions(cfg, world.s);
    let sigma = cfg.zeta / Float::sqrt(frames.max(1) as f64);
    if sigma > 0.0 {
        for pad in obs.iter_mut() {
            for (_, p) in pad.iter_mut() {
                let noise = Vector3::from_fn(|_, _| {
                    let n: f64 = StandardNormal.sample(&mut world.rng);
                    n * sigma
                });
                p.0 += noise;
            }
        }
    }
    Ok(obs)
}

pub fn detect_pads(cfg: &SimConfig, raw: &MarkerObservation, policy: &ContactPolicy) -> Result<[ContactSet; PAD_COUNT], SimError> {
    let c0 = detect_contact(&cfg.grid(0), &raw[0], policy.min_points, &policy.ladder)?;
    let c1 = detect_contact(&cfg.grid(1), &raw[1], policy.min_points, &policy.ladder)?;
    Ok([c0, c1])
}

/// Single-frame contact observation of both pads.
pub fn observe(world: &mut WorldState, cfg: &SimConfig) -> Result<[ContactSet; PAD_COUNT], SimError> {
    let raw = observe_markers(world, cfg, 1)?;
    detect_pads(cfg, &raw, &cfg.contact)
}

/// Frame-averaged contact observation.
pub fn observe_averaged(world: &mut WorldState, cfg: &SimConfig, policy: &ContactPolicy, frames: u32) -> Result<[ContactSet; PAD_COUNT], SimError> {
    let raw = observe_markers(world, cfg, frames)?;
    detect_pads(cfg, &raw, policy)
}

const SCAN_SAMPLES: usize = 64;
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Moves the gripper by `delta` (gripper frame) and relaxes the handle to
/// the minimum-energy parameter inside the trust region.
pub fn step_gripper(world: &WorldState, cfg: &SimConfig, delta: &Pose) -> Result<WorldState, SimError> {
    let mut next = world.clone();
    step_gripper_in_place(&mut next, cfg, delta)?;
    Ok(next)
}

pub fn step_gripper_in_place(world: &mut WorldState, cfg: &SimConfig, delta: &Pose) -> Result<(), SimError> {
    if !world.is_grasped() {
        return Err(SimError::NotGrasped);
    }
    world.gripper_pose = world.gripper_pose.compose(delta);
    let (lo, hi) = trust_window(world, cfg, delta);
    world.s = relax(world, cfg, lo, hi);
    Ok(())
}

/// Parameter interval the handle may move within during one step.
pub fn trust_window(world: &WorldState, cfg: &SimConfig, delta: &Pose) -> (f64, f64) {
    let motion = delta.translation().norm() + delta.rotation_angle() * cfg.pad_reach();
    let window_mm = cfg.trust_region.max(2.0 * motion);
    let traj = &world.trajectory;
    let total = traj.total_arc_length().max(1e-9);
    let span = 1.0 - traj.start();
    // Guard against near-stationary points of Bézier curves.
    let speed = traj.speed_at(world.s).max(0.1 * total / span.max(1e-9));
    let ds = (window_mm / speed).min(0.25);
    ((world.s - ds).max(0.0), (world.s + ds).min(1.0))
}

fn relax(world: &WorldState, cfg: &SimConfig, lo: f64, hi: f64) -> f64 {
    let energy = |s: f64| world.energy_at(cfg, s);
    if hi <= lo {
        return lo;
    }
    let h = (hi - lo) / SCAN_SAMPLES as f64;
    let mut best_k = 0;
    let mut best_e = f64::INFINITY;
    for k in 0..=SCAN_SAMPLES {
        let e = energy(lo + k as f64 * h);
        if e < best_e {
            best_e = e;
            best_k = k;
        }
    }
    let mut a = lo + best_k.saturating_sub(1) as f64 * h;
    let mut b = (lo + (best_k + 1) as f64 * h).min(hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut ec, mut ed) = (energy(c), energy(d));
    while b - a > cfg.handle_solver_tolerance {
        if ec < ed {
            b = d;
            d = c;
            ed = ec;
            c = b - INV_PHI * (b - a);
            ec = energy(c);
        } else {
            a = c;
            c = d;
            ec = ed;
            d = a + INV_PHI * (b - a);
            ed = energy(d);
        }
    }
    // Candidates: golden-section result, best scan sample and the window
    // ends, so a joint limit is reached exactly.
    let mid = 0.5 * (a + b);
    let mut best = (energy(mid), mid);
    for s in [lo + best_k as f64 * h, lo, hi, world.s] {
        let e = energy(s);
        if e < best.0 {
            best = (e, s);
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::f_d;
    use core::f64::consts::PI;

    fn drawer() -> Trajectory {
        Trajectory::prismatic(Pose::identity(), Vector3::new(0.0, -1.0, 0.0), 300.0).unwrap()
    }

    fn grasped(traj: Trajectory, cfg: &SimConfig) -> (WorldState, [ContactSet; 2]) {
        let world = WorldState::new(traj, 11);
        let pose = *world.trajectory.handle_rest_pose();
        grasp(&world, cfg, &pose).unwrap()
    }

    #[test]
    fn centered_grasp_glues_patch() {
        let cfg = SimConfig::noise_free();
        let (world, reference) = grasped(drawer(), &cfg);
        // 8 columns fit within ±15 mm and 6 rows within ±10 mm.
        assert_eq!(world.affixed_contacts[0].len(), 48);
        assert_eq!(world.affixed_contacts[1].len(), 48);
        for set in &reference {
            assert!(set.len() >= 8);
            for (_, p) in &set.points {
                assert!((p.x() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn displaced_grasp_fails() {
        let cfg = SimConfig::noise_free();
        let world = WorldState::new(drawer(), 1);
        let far = Pose::from_translation(Vector3::new(100.0, 0.0, 0.0));
        assert!(matches!(grasp(&world, &cfg, &far), Err(SimError::GraspFailed { affixed: 0, .. })));
    }

    #[test]
    fn uncompressed_grasp_fails() {
        let cfg = SimConfig {
            grasp_depth: 1e-9,
            ..SimConfig::noise_free()
        };
        let world = WorldState::new(drawer(), 1);
        let pose = *world.trajectory.handle_rest_pose();
        // Nothing is compressed, so no marker clears the ladder floor.
        assert!(matches!(grasp(&world, &cfg, &pose), Err(SimError::GraspFailed { pad: 0, affixed: 0, .. })));
    }

    #[test]
    fn still_gripper_observes_reference() {
        let cfg = SimConfig::noise_free();
        let (mut world, reference) = grasped(drawer(), &cfg);
        let obs = observe(&mut world, &cfg).unwrap();
        assert_eq!(obs, reference);
        for pad in 0..2 {
            assert_eq!(f_d(&obs[pad], &reference[pad]).unwrap(), 0.0);
        }
    }

    #[test]
    fn normal_shift_moves_every_marker() {
        let cfg = SimConfig::noise_free();
        let (mut world, _) = grasped(drawer(), &cfg);
        let before = observe_markers(&mut world, &cfg, 1).unwrap();
        // Pure gripper translation along the pad-1 normal, handle pinned.
        world.gripper_pose = world.gripper_pose.compose(&Pose::from_translation(Vector3::new(1.0, 0.0, 0.0)));
        let after = observe_markers(&mut world, &cfg, 1).unwrap();
        for (id, p) in &world.affixed_contacts[1] {
            let _ = p;
            let dn = after[1][id.index()].1.x() - before[1][id.index()].1.x();
            assert!((dn + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn observation_noise_has_requested_spread() {
        let cfg = SimConfig::default();
        let (mut world, _) = grasped(drawer(), &cfg);
        let clean = world.marker_positions(&cfg, world.s);
        let (mut sum, mut sum2, mut n) = ([0.0; 3], [0.0; 3], 0.0);
        for _ in 0..10_000 {
            let obs = observe_markers(&mut world, &cfg, 1).unwrap();
            let d = obs[0][0].1 .0 - clean[0][0].1 .0;
            for k in 0..3 {
                sum[k] += d[k];
                sum2[k] += d[k] * d[k];
            }
            n += 1.0;
        }
        for k in 0..3 {
            let mean = sum[k] / n;
            let std = (sum2[k] / n - mean * mean).sqrt();
            assert!((std - 2.0).abs() < 0.1, "axis {k}: {std}");
        }
    }

    #[test]
    fn aligned_pull_is_energy_neutral() {
        let cfg = SimConfig::noise_free();
        let (world, _) = grasped(drawer(), &cfg);
        let e0 = world.energy(&cfg);
        // Drawer opens toward world -y; gripper frame equals world here.
        let next = step_gripper(&world, &cfg, &Pose::from_translation(Vector3::new(0.0, -1.0, 0.0))).unwrap();
        assert!((next.s - 1.0 / 300.0).abs() < 1e-7);
        assert!((next.energy(&cfg) - e0).abs() < 1e-6);
    }

    #[test]
    fn orthogonal_push_does_not_move_drawer() {
        let cfg = SimConfig::noise_free();
        let (world, _) = grasped(drawer(), &cfg);
        let next = step_gripper(&world, &cfg, &Pose::from_translation(Vector3::new(0.0, 0.0, 1.0))).unwrap();
        assert!(next.s.abs() < 1e-7);
    }

    #[test]
    fn revolute_tangential_pull() {
        let cfg = SimConfig::noise_free();
        let r = 400.0;
        let span = PI / 2.0;
        let door = Trajectory::revolute(Pose::identity(), Vector3::new(-r, 0.0, 0.0), Vector3::new(0.0, 0.0, -1.0), span).unwrap();
        let (world, _) = grasped(door, &cfg);
        let next = step_gripper(&world, &cfg, &Pose::from_translation(Vector3::new(0.0, -1.0, 0.0))).unwrap();
        let expected = 1.0 / (r * span);
        assert!(((next.s - expected) / expected).abs() < 5e-3, "{} vs {}", next.s, expected);

        // Dense scan of the energy over the trust window.
        let (lo, hi) = trust_window(&world, &cfg, &Pose::from_translation(Vector3::new(0.0, -1.0, 0.0)));
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..=100_000 {
            let s = lo + (hi - lo) * k as f64 / 100_000.0;
            let e = next.energy_at(&cfg, s);
            if e < best.0 {
                best = (e, s);
            }
        }
        assert!((next.s - best.1).abs() < 2.0 * (hi - lo) / 100_000.0);
        assert!(next.energy(&cfg) <= best.0 + 1e-9);
    }

    #[test]
    fn motion_requires_grasp() {
        let cfg = SimConfig::noise_free();
        let world = WorldState::new(drawer(), 1);
        assert_eq!(step_gripper(&world, &cfg, &Pose::identity()).unwrap_err(), SimError::NotGrasped);
        let mut w = world.clone();
        assert_eq!(observe(&mut w, &cfg).unwrap_err(), SimError::NotGrasped);
    }

    #[test]
    fn config_validation() {
        let cfg = SimConfig {
            grasp_depth: 2.5,
            ..SimConfig::default()
        };
        assert!(cfg.validate(2.0).is_err());
        assert!(SimConfig::default().validate(2.0).is_ok());
    }
}
