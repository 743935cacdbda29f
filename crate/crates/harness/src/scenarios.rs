//! Built-in suites.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tacman_core::articulation::{generate_playboard_with, PlayboardConfig};
use tacman_core::JointKind;

use crate::schema::{BaselineSettings, DirectionSpec, Method, PoseSpec, Scenario, Suite, TrajectorySpec};

fn scenario(id: String, trajectory: TrajectorySpec, methods: &[Method]) -> Scenario {
    Scenario {
        id,
        trajectory,
        grasp: Default::default(),
        methods: methods.to_vec(),
        success: None,
        preliminary_direction: None,
        controller: None,
        baselines: None,
        seed: None,
    }
}

fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

/// Revolute hinge `r` meters from the handle on one of four sides.
fn hinge(side: usize, r: f64) -> ([f64; 3], [f64; 3]) {
    match side % 4 {
        0 => ([-r, 0.0, 0.0], [0.0, 0.0, -1.0]),
        1 => ([r, 0.0, 0.0], [0.0, 0.0, 1.0]),
        2 => ([0.0, 0.0, -r], [1.0, 0.0, 0.0]),
        _ => ([0.0, 0.0, r], [-1.0, 0.0, 0.0]),
    }
}

/// Scenarios of one generated playboard order, with control points written
/// out explicitly so the suite file is self-contained.
pub fn playboards(order: usize, count: usize, seed: u64, methods: &[Method]) -> Result<Vec<Scenario>, String> {
    let cfg = PlayboardConfig::with_order(order);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let traj = generate_playboard_with(&cfg, &mut rng).map_err(|e| e.to_string())?;
            let JointKind::Bezier { control, .. } = traj.kind() else {
                unreachable!("generator yields Bézier trajectories")
            };
            let control_m = control.iter().map(|c| [c.x / 1000.0, c.y / 1000.0]).collect();
            Ok(scenario(
                format!("playboard-o{order}-{i:02}"),
                TrajectorySpec::Bezier {
                    control_m,
                    start: traj.start(),
                    board: PoseSpec::default(),
                },
                methods,
            ))
        })
        .collect()
}

/// Desk-scale benchmark: 25 prismatic, 25 revolute, 10 helical and 25
/// playboards for each order from 2 to 5, every one run with all methods.
pub fn default_suite(master_seed: u64) -> Suite {
    let methods = Method::ALL;
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    let mut scenarios = Vec::new();
    for i in 0..25 {
        let tilt: f64 = rng.random_range(-PI / 3.0..PI / 3.0);
        let length = round6(rng.random_range(0.3..0.45));
        scenarios.push(scenario(
            format!("prismatic-{i:02}"),
            TrajectorySpec::Prismatic {
                direction: [0.0, round6(-tilt.cos()), round6(tilt.sin())],
                length_m: length,
                handle: PoseSpec::default(),
            },
            &methods,
        ));
    }
    for i in 0..25 {
        let r = round6(rng.random_range(0.25..0.6));
        let (axis_point_m, axis_dir) = hinge(i, r);
        scenarios.push(scenario(
            format!("revolute-{i:02}"),
            TrajectorySpec::Revolute {
                axis_point_m,
                axis_dir,
                span_deg: 90.0,
                handle: PoseSpec::default(),
            },
            &methods,
        ));
    }
    for i in 0..10 {
        let r = round6(rng.random_range(0.15..0.4));
        let pitch = round6(rng.random_range(0.05..0.2));
        let (axis_point_m, axis_dir) = hinge(i % 2, r);
        scenarios.push(scenario(
            format!("helical-{i:02}"),
            TrajectorySpec::Helical {
                axis_point_m,
                axis_dir,
                span_deg: 180.0,
                pitch_m: pitch,
                handle: PoseSpec::default(),
            },
            &methods,
        ));
    }
    for order in 2..=5 {
        let seed = rng.random();
        scenarios.extend(playboards(order, 25, seed, &methods).expect("default playboard config is valid"));
    }
    Suite {
        scenarios,
        ..Suite::empty(master_seed)
    }
}

/// Three hinges and a drawer that start from the same grasp and share one
/// preliminary direction.
pub fn quartet_suite(master_seed: u64) -> Suite {
    let shared = DirectionSpec {
        vector: Some([0.0, -1.0, 0.0]),
        ..DirectionSpec::default()
    };
    let revolute = |id: &str, side| {
        let (axis_point_m, axis_dir) = hinge(side, 0.4);
        scenario(
            id.into(),
            TrajectorySpec::Revolute {
                axis_point_m,
                axis_dir,
                span_deg: 90.0,
                handle: PoseSpec::default(),
            },
            &[Method::Tacman],
        )
    };
    let mut scenarios = vec![
        revolute("quartet-left-hinge", 0),
        revolute("quartet-right-hinge", 1),
        revolute("quartet-bottom-hinge", 2),
        scenario(
            "quartet-drawer".into(),
            TrajectorySpec::Prismatic {
                direction: [0.0, -1.0, 0.0],
                length_m: 0.3,
                handle: PoseSpec::default(),
            },
            &[Method::Tacman],
        ),
    ];
    for s in &mut scenarios {
        s.preliminary_direction = Some(shared.clone());
    }
    Suite {
        scenarios,
        ..Suite::empty(master_seed)
    }
}

/// A 0.4 m door, with the pre-planned executor assuming a radius 10% too
/// large.
pub fn radius_error_suite(master_seed: u64) -> Suite {
    let (axis_point_m, axis_dir) = hinge(0, 0.4);
    let mut door = scenario(
        "door-radius-error".into(),
        TrajectorySpec::Revolute {
            axis_point_m,
            axis_dir,
            span_deg: 90.0,
            handle: PoseSpec::default(),
        },
        &[Method::Tacman, Method::Preplanned],
    );
    door.baselines = Some(BaselineSettings {
        radius_offset_m: Some(0.04),
        ..BaselineSettings::default()
    });
    Suite {
        scenarios: vec![door],
        ..Suite::empty(master_seed)
    }
}

/// Drawer pulled along a preliminary direction rotated away from the truth.
pub fn misaligned_drawer_suite(master_seed: u64, misalign_deg: f64) -> Suite {
    let mut drawer = scenario(
        "drawer-misaligned".into(),
        TrajectorySpec::Prismatic {
            direction: [0.0, -1.0, 0.0],
            length_m: 0.3,
            handle: PoseSpec::default(),
        },
        &[Method::Tacman],
    );
    drawer.preliminary_direction = Some(DirectionSpec {
        misalign_deg,
        ..DirectionSpec::default()
    });
    Suite {
        scenarios: vec![drawer],
        ..Suite::empty(master_seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_shape() {
        let suite = default_suite(1);
        suite.validate().unwrap();
        let count = |prefix: &str| suite.scenarios.iter().filter(|s| s.id.starts_with(prefix)).count();
        assert_eq!(count("prismatic-"), 25);
        assert_eq!(count("revolute-"), 25);
        assert_eq!(count("helical-"), 10);
        for order in 2..=5 {
            assert_eq!(count(&format!("playboard-o{order}-")), 25);
        }
    }

    #[test]
    fn builders_are_deterministic() {
        assert_eq!(default_suite(4), default_suite(4));
        assert_ne!(default_suite(4), default_suite(5));
    }

    #[test]
    fn quartet_shares_direction() {
        let suite = quartet_suite(0);
        suite.validate().unwrap();
        let dirs: Vec<_> = suite.scenarios.iter().map(|s| s.preliminary_direction.clone()).collect();
        assert!(dirs.windows(2).all(|w| w[0] == w[1]));
    }
}
