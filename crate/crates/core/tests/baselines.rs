use nalgebra::{Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;
use tacman_core::articulation::{generate_playboard, JointKind, PlayboardConfig};
use tacman_core::baselines::*;
use tacman_core::controller::{self, ControllerConfig, ControllerState, FailureReason};
use tacman_core::metrics::{SuccessCriterion, REVOLUTE_SUCCESS_ANGLE};
use tacman_core::sim::*;
use tacman_core::{ContactSet, Pose, Trajectory};

fn door() -> Trajectory {
    Trajectory::revolute(Pose::identity(), Vector3::new(-400.0, 0.0, 0.0), Vector3::new(0.0, 0.0, -1.0), PI / 2.0).unwrap()
}

fn setup(traj: Trajectory, seed: u64) -> (WorldState, [ContactSet; 2]) {
    let world = WorldState::new(traj, seed);
    let pose = *world.trajectory.handle_rest_pose();
    grasp(&world, &SimConfig::default(), &pose).unwrap()
}

#[test]
fn bezier_draws_replay_from_the_seed() {
    let board = generate_playboard(&PlayboardConfig::with_order(3), 5).unwrap();
    let noise = BaselineNoise { xi_std: 0.1, seed: 77 };
    let (perturbed, _) = perturb_model(&board, &noise).unwrap();
    let (JointKind::Bezier { control: truth, .. }, JointKind::Bezier { control: got, .. }) = (board.kind(), perturbed.kind()) else {
        panic!("kind changed");
    };
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut draw = || -> f64 {
        let n: f64 = StandardNormal.sample(&mut rng);
        n * 0.1
    };
    assert_eq!(got[0], truth[0]);
    for k in 1..truth.len() {
        let dx = draw();
        let dy = draw();
        let expected = truth[k] + Vector2::new(dx, dy) * 1000.0;
        assert!((got[k] - expected).norm() < 1e-9);
    }
}

#[test]
fn ten_percent_radius_error_loses_the_door() {
    let sim = SimConfig::default();
    let (mut world, reference) = setup(door(), 1);
    let assumed = apply_perturbation(&world.trajectory, &Perturbation::Radius(0.04)).unwrap();
    assert!((assumed.radius().unwrap() - 440.0).abs() < 1e-9);
    let criterion = SuccessCriterion::default_for(&world.trajectory);
    let r = run_preplanned(&mut world, &sim, &PreplannedConfig::default(), &assumed, &reference, &criterion).unwrap();
    assert_eq!(r.failure, Some(FailureReason::LostContact));
    assert!(r.final_s * PI / 2.0 < REVOLUTE_SUCCESS_ANGLE);
    assert!(r.sr_w < 100.0);

    // The tactile controller opens the identical door.
    let cfg = ControllerConfig::default();
    let (mut world, reference) = setup(door(), 1);
    let mut state = ControllerState::new(reference, Vector3::new(0.0, -1.0, 0.0), &cfg).unwrap();
    let r = controller::run(&mut world, &sim, &cfg, &mut state, &criterion).unwrap();
    assert!(r.success);
}

#[test]
fn baseline_runs_are_deterministic() {
    let sim = SimConfig::default();
    let once = |seed: u64| {
        let (mut world, reference) = setup(door(), seed);
        let (assumed, _) = perturb_model(&world.trajectory, &BaselineNoise { xi_std: 0.01, seed }).unwrap();
        let criterion = SuccessCriterion::default_for(&world.trajectory);
        let a = run_preplanned(&mut world, &sim, &PreplannedConfig::default(), &assumed, &reference, &criterion).unwrap();
        let (mut world, _) = setup(door(), seed);
        let b = run_compliant(&mut world, &sim, &Vector3::new(0.0, -1.0, 0.0), &ComplianceConfig::default(), &criterion).unwrap();
        (a, b)
    };
    assert_eq!(once(4), once(4));
}

#[test]
fn unlimited_compliance_never_trips_the_limit() {
    let sim = SimConfig::default();
    let (mut world, _) = setup(door(), 2);
    let cfg = ComplianceConfig {
        lateral_compliance_limit: f64::INFINITY,
        max_iterations: 400,
        ..ComplianceConfig::default()
    };
    let criterion = SuccessCriterion::default_for(&world.trajectory);
    let r = run_compliant(&mut world, &sim, &Vector3::new(0.0, -1.0, 0.0), &cfg, &criterion).unwrap();
    assert_ne!(r.failure, Some(FailureReason::ComplianceLimit));
}

#[test]
fn compliant_follower_fails_on_order_five_boards() {
    let sim = SimConfig::default();
    let mut failures = 0;
    for seed in 0..5 {
        let board = generate_playboard(&PlayboardConfig::with_order(5), seed).unwrap();
        let (mut world, _) = setup(board, seed);
        let dir = world.gripper_pose.rotation() * controller::default_preliminary_direction(&world.trajectory, &world.gripper_pose);
        let criterion = SuccessCriterion::default_for(&world.trajectory);
        let r = run_compliant(&mut world, &sim, &dir, &ComplianceConfig::default(), &criterion).unwrap();
        if !r.success {
            failures += 1;
            assert!(r.final_s < 1.0);
        }
    }
    assert_eq!(failures, 5);
}

#[test]
fn unsupported_draw_is_rejected() {
    let drawer = Trajectory::prismatic(Pose::identity(), Vector3::new(0.0, -1.0, 0.0), 300.0).unwrap();
    assert!(matches!(
        apply_perturbation(&drawer, &Perturbation::Radius(0.1)),
        Err(BaselineError::UnsupportedKind("prismatic"))
    ));
}
