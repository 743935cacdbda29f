//! Random Bézier playboards.
//!
//! Control points are drawn uniformly over the `W × H` board area. A curve is
//! rejected when its groove, a tube of radius `w` around the curve, touches
//! itself: two pieces of the curve come closer than `2w` while lying more
//! than `πw` apart along the curve. A circular arc of radius `w` sits exactly
//! on that limit.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::Vector2;
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{bezier, ArticulationError, Trajectory};
use crate::se3::Pose;

/// Polyline resolution of the self-intersection test.
pub const SELF_INTERSECTION_SEGMENTS: usize = 2000;

const MAX_REJECTIONS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlayboardConfig {
    /// Board height (mm).
    pub height: f64,
    /// Board width (mm).
    pub width: f64,
    /// Groove padding (mm).
    pub padding: f64,
    pub n_ctrl: usize,
    /// Guide-pin radius (mm). Kept for completeness; the groove constraint is
    /// kinematic here.
    pub pin_radius: f64,
    /// Start parameter of the handle.
    pub eta: f64,
}

impl Default for PlayboardConfig {
    fn default() -> Self {
        Self {
            height: 400.0,
            width: 600.0,
            padding: 40.0,
            n_ctrl: 4,
            pin_radius: 15.0,
            eta: 0.02,
        }
    }
}

impl PlayboardConfig {
    pub fn with_order(order: usize) -> Self {
        Self {
            n_ctrl: order + 1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ArticulationError> {
        if !(3..=6).contains(&self.n_ctrl) {
            return Err(ArticulationError::InvalidConfig("n_ctrl must lie in [3, 6]"));
        }
        if !(self.height > 0.0 && self.width > 0.0 && self.padding > 0.0 && self.pin_radius > 0.0) {
            return Err(ArticulationError::InvalidConfig("board dimensions must be positive"));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(ArticulationError::InvalidConfig("eta must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Deterministic playboard for `seed`.
pub fn generate_playboard(cfg: &PlayboardConfig, seed: u64) -> Result<Trajectory, ArticulationError> {
    generate_playboard_with(cfg, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn generate_playboard_with<R: Rng + ?Sized>(cfg: &PlayboardConfig, rng: &mut R) -> Result<Trajectory, ArticulationError> {
    cfg.validate()?;
    for _ in 0..MAX_REJECTIONS {
        let control: Vec<Vector2<f64>> = (0..cfg.n_ctrl)
            .map(|_| Vector2::new(rng.random::<f64>() * cfg.width, rng.random::<f64>() * cfg.height))
            .collect();
        if !self_intersects(&control, cfg.padding) {
            return Trajectory::bezier(control, Pose::identity(), cfg.eta);
        }
    }
    Err(ArticulationError::GenerationExhausted(MAX_REJECTIONS))
}

/// Whether the padded groove around the curve overlaps itself: either the
/// curve bends tighter than `padding` somewhere, or two stretches more than
/// half a padded turn apart along the curve come within `2 * padding`.
pub fn self_intersects(control: &[Vector2<f64>], padding: f64) -> bool {
    if control.len() < 3 {
        return false;
    }
    let n = SELF_INTERSECTION_SEGMENTS;
    if (0..=n).any(|k| bezier::curvature_radius(control, k as f64 / n as f64) < padding) {
        return true;
    }
    let pts = bezier::polyline(control, SELF_INTERSECTION_SEGMENTS);
    let mut cumulative = Vec::with_capacity(pts.len());
    let mut acc = 0.0;
    cumulative.push(0.0);
    for w in pts.windows(2) {
        acc += (w[1] - w[0]).norm();
        cumulative.push(acc);
    }

    let reach = 2.0 * padding;
    let min_separation = PI * padding;
    let cell = reach.max(1e-9);
    let key = |v: f64| Float::floor(v / cell) as i64;

    let mut grid: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    for i in 0..SELF_INTERSECTION_SEGMENTS {
        let (a, b) = (pts[i], pts[i + 1]);
        for cx in key(a.x.min(b.x))..=key(a.x.max(b.x)) {
            for cy in key(a.y.min(b.y))..=key(a.y.max(b.y)) {
                grid.entry((cx, cy)).or_default().push(i);
            }
        }
    }

    for i in 0..SELF_INTERSECTION_SEGMENTS {
        let (a, b) = (pts[i], pts[i + 1]);
        for cx in key(a.x.min(b.x) - reach)..=key(a.x.max(b.x) + reach) {
            for cy in key(a.y.min(b.y) - reach)..=key(a.y.max(b.y) + reach) {
                let Some(bucket) = grid.get(&(cx, cy)) else { continue };
                for &j in bucket {
                    if j <= i || cumulative[j] - cumulative[i + 1] <= min_separation {
                        continue;
                    }
                    if segment_distance(a, b, pts[j], pts[j + 1]) < reach {
                        return true;
                    }
                }
            }
        }
    }
    false
}

fn point_segment_distance(p: Vector2<f64>, a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (a + ab * t - p).norm()
}

fn cross(a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

fn segment_distance(a: Vector2<f64>, b: Vector2<f64>, c: Vector2<f64>, d: Vector2<f64>) -> f64 {
    let d1 = cross(b - a, c - a);
    let d2 = cross(b - a, d - a);
    let d3 = cross(d - c, a - c);
    let d4 = cross(d - c, b - c);
    if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straightish_quadratic_is_clean() {
        let c = [Vector2::new(0.0, 0.0), Vector2::new(300.0, 30.0), Vector2::new(600.0, 0.0)];
        assert!(!self_intersects(&c, 40.0));
    }

    #[test]
    fn figure_eight_is_flagged() {
        // Quintic whose control polygon zig-zags so the curve crosses itself.
        let c = [
            Vector2::new(0.0, 0.0),
            Vector2::new(600.0, 400.0),
            Vector2::new(600.0, 0.0),
            Vector2::new(0.0, 400.0),
            Vector2::new(0.0, 0.0),
            Vector2::new(600.0, 200.0),
        ];
        assert!(self_intersects(&c, 40.0));
    }

    #[test]
    fn hairpin_is_flagged() {
        let c = [
            Vector2::new(471.7, 286.4),
            Vector2::new(22.8, 203.1),
            Vector2::new(384.6, 385.7),
            Vector2::new(121.2, 201.1),
        ];
        assert!(self_intersects(&c, 40.0));
    }

    #[test]
    fn config_validation() {
        let cfg = PlayboardConfig {
            n_ctrl: 2,
            ..PlayboardConfig::default()
        };
        assert_eq!(
            generate_playboard(&cfg, 1).unwrap_err(),
            ArticulationError::InvalidConfig("n_ctrl must lie in [3, 6]")
        );
        let cfg = PlayboardConfig {
            eta: 1.0,
            ..PlayboardConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn generation_is_seeded() {
        let cfg = PlayboardConfig::with_order(3);
        let a = generate_playboard(&cfg, 42).unwrap();
        let b = generate_playboard(&cfg, 42).unwrap();
        assert_eq!(a, b);
        let c = generate_playboard(&cfg, 43).unwrap();
        assert_ne!(a, c);
        assert!((a.start() - 0.02).abs() < 1e-15);
    }

    /// Replays a fixed cycle of unit-interval draws.
    struct CyclicRng {
        values: &'static [f64],
        next: usize,
    }

    impl rand::RngCore for CyclicRng {
        fn next_u32(&mut self) -> u32 {
            self.next_u64() as u32
        }

        fn next_u64(&mut self) -> u64 {
            let v = self.values[self.next % self.values.len()];
            self.next += 1;
            // Inverse of the 53-bit mantissa mapping used for f64 sampling.
            ((v * (1u64 << 53) as f64) as u64) << 11
        }

        fn fill_bytes(&mut self, dst: &mut [u8]) {
            rand::RngCore::fill_bytes(&mut ChaCha8Rng::seed_from_u64(0), dst)
        }
    }

    #[test]
    fn always_crossing_source_exhausts() {
        let mut rng = CyclicRng {
            values: &[0.0, 0.0, 0.999, 0.999, 0.999, 0.0, 0.0, 0.999, 0.0, 0.0, 0.999, 0.5],
            next: 0,
        };
        let cfg = PlayboardConfig::with_order(5);
        assert_eq!(
            generate_playboard_with(&cfg, &mut rng).unwrap_err(),
            ArticulationError::GenerationExhausted(10_000)
        );
    }
}
