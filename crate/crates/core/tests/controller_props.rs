use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use tacman_core::articulation::{generate_playboard, PlayboardConfig};
use tacman_core::contact::summarize_pads;
use tacman_core::controller::*;
use tacman_core::metrics::SuccessCriterion;
use tacman_core::sim::*;
use tacman_core::{ContactSet, Pose, Trajectory};

fn door() -> Trajectory {
    Trajectory::revolute(Pose::identity(), Vector3::new(-400.0, 0.0, 0.0), Vector3::new(0.0, 0.0, -1.0), PI / 2.0).unwrap()
}

fn setup(traj: Trajectory, sim: &SimConfig, seed: u64) -> (WorldState, [ContactSet; 2]) {
    let world = WorldState::new(traj, seed);
    let pose = *world.trajectory.handle_rest_pose();
    grasp(&world, sim, &pose).unwrap()
}

fn full_run(traj: Trajectory, sim: &SimConfig, seed: u64) -> TrialResult {
    let cfg = ControllerConfig::default();
    let (mut world, reference) = setup(traj, sim, seed);
    let dir = default_preliminary_direction(&world.trajectory, &world.gripper_pose);
    let mut state = ControllerState::new(reference, dir, &cfg).unwrap();
    let criterion = SuccessCriterion::default_for(&world.trajectory);
    run(&mut world, sim, &cfg, &mut state, &criterion).unwrap()
}

#[test]
fn straight_pull_stops_where_a_dense_scan_says() {
    let sim = SimConfig::noise_free();
    let cfg = ControllerConfig::default();
    let (world, reference) = setup(door(), &sim, 1);
    let dir = Vector3::new(0.0, -1.0, 0.0);
    let mut state = ControllerState::new(reference.clone(), dir, &cfg).unwrap();
    let inc = state.exec_increment();
    let criterion = SuccessCriterion::default_for(&world.trajectory);
    let mut w = world.clone();
    execute_stage(&mut w, &sim, &cfg, &mut state, &criterion).unwrap();
    assert_eq!(state.phase, Phase::Recovering);
    let t = state.exec_steps as f64 * inc;
    assert!(t > 0.0);

    // Dense scan: same ray, fiftyfold finer steps.
    let boundary = cfg.boundary();
    let mut scan = world.clone();
    let fine = inc / 50.0;
    let mut travelled = 0.0;
    let t_dense = loop {
        scan = step_gripper(&scan, &sim, &Pose::from_translation(dir * fine)).unwrap();
        travelled += fine;
        let obs = observe(&mut scan, &SimConfig { contact: cfg.epsilon_policy, ..sim.clone() }).unwrap();
        let summary = summarize_pads(&obs, &sim.grids(), &reference).unwrap();
        if boundary.reached(&summary).is_some() {
            break travelled;
        }
        assert!(travelled < 1000.0);
    };
    assert!(t >= t_dense - 1e-6 && t < t_dense + inc + 1e-6, "t {t} dense {t_dense} inc {inc}");
}

#[test]
fn noise_free_transitions_sit_between_scaled_and_raw_bounds() {
    let sim = SimConfig::noise_free();
    let cfg = ControllerConfig::default();
    let mut trajectories = vec![door()];
    for order in [3, 5] {
        trajectories.push(generate_playboard(&PlayboardConfig::with_order(order), 17).unwrap());
    }
    for traj in trajectories {
        let result = full_run(traj, &sim, 2);
        assert!(result.success);
        let scaled = cfg.boundary();
        let raw = cfg.raw_bounds();
        for rec in &result.iteration_log {
            if let Some(Event::Boundary(m)) = rec.event {
                let v = ContactBounds::value(&rec.summary, m);
                assert!(v >= scaled.bound(m) && v < raw.bound(m), "{m:?} {v}");
            }
        }
    }
}

#[test]
fn noise_free_recovery_contracts() {
    let sim = SimConfig::noise_free();
    let cfg = ControllerConfig::default();
    for traj in [door(), generate_playboard(&PlayboardConfig::with_order(4), 3).unwrap()] {
        let result = full_run(traj, &sim, 1);
        assert!(result.success);
        let mut previous: Option<f64> = None;
        for rec in &result.iteration_log {
            match rec.phase {
                Phase::Recovering => {
                    let fd = rec.summary.mean_pair_distance;
                    if let Some(p) = previous {
                        assert!(fd < p || p <= cfg.recovery_exit(), "{p} -> {fd}");
                    }
                    previous = Some(fd);
                }
                _ => previous = Some(rec.summary.mean_pair_distance),
            }
        }
    }
}

#[test]
fn noisy_recovery_settles_inside_the_bound() {
    let sim = SimConfig::default();
    let cfg = ControllerConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for seed in 0..100 {
        let (mut world, reference) = setup(door(), &sim, seed);
        let q = Pose::from_axis_angle(&Vector3::new(rng.random(), rng.random(), 1.0), rng.random_range(-0.02..0.02))
            .with_translation(Vector3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)));
        world.gripper_pose = world.gripper_pose.compose(&q);
        let mut state = ControllerState::new(reference, Vector3::new(0.0, -1.0, 0.0), &cfg).unwrap();
        state.phase = Phase::Recovering;
        let criterion = SuccessCriterion::default_for(&world.trajectory);
        recover_stage(&mut world, &sim, &cfg, &mut state, &criterion).unwrap();
        assert_eq!(state.phase, Phase::Executing, "seed {seed}");
        let exit = state.recovery_exits[0];
        assert!(exit <= cfg.d, "seed {seed}: {exit}");
    }
}

#[test]
fn noisy_aligned_drawer_needs_no_recovery() {
    let drawer = Trajectory::prismatic(Pose::identity(), Vector3::new(0.0, -1.0, 0.0), 300.0).unwrap();
    let result = full_run(drawer, &SimConfig::default(), 8);
    assert!(result.success);
    assert_eq!(result.sr_w, 100.0);
    assert_eq!(result.cycles, 0);
}

#[test]
fn twenty_degree_misalignment_is_absorbed() {
    let drawer = Trajectory::prismatic(Pose::identity(), Vector3::new(0.0, -1.0, 0.0), 300.0).unwrap();
    let sim = SimConfig::default();
    let cfg = ControllerConfig::default();
    let (mut world, reference) = setup(drawer, &sim, 3);
    let dir = misalign(&Vector3::new(0.0, -1.0, 0.0), &Vector3::z(), 20f64.to_radians());
    let mut state = ControllerState::new(reference, dir, &cfg).unwrap();
    let criterion = SuccessCriterion::default_for(&world.trajectory);
    let result = run(&mut world, &sim, &cfg, &mut state, &criterion).unwrap();
    assert!(result.success, "{:?}", result.failure);
    assert!(result.cycles > 0);
}

#[test]
fn stage_preconditions_are_checked() {
    let sim = SimConfig::noise_free();
    let cfg = ControllerConfig::default();
    let (mut world, reference) = setup(door(), &sim, 1);
    let mut state = ControllerState::new(reference, Vector3::new(0.0, -1.0, 0.0), &cfg).unwrap();
    let criterion = SuccessCriterion::default_for(&world.trajectory);
    assert_eq!(
        recover_stage(&mut world, &sim, &cfg, &mut state, &criterion),
        Err(ControllerError::WrongPhase(Phase::Executing))
    );
}
