//! Least-squares rigid registration of corresponded point sets.

use nalgebra::{Matrix3, Vector3};

use crate::se3::{AugmentedPoint, Pose};

/// Relative singular-value floor below which the cross-covariance is treated
/// as rank-deficient.
const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum KabschError {
    /// Fewer than three pairs, or the paired points are colinear
    /// (cross-covariance of rank ≤ 1).
    #[error("degenerate correspondences: {pairs} pairs, cross-covariance rank {rank}")]
    DegenerateCorrespondences { pairs: usize, rank: usize },
    #[error("correspondence index {index} out of range")]
    IndexOutOfRange { index: usize },
}

/// Rigid transform `T` minimizing `Σ ‖T·source[i] − target[j]‖²` over the
/// index pairs `(i, j)`.
///
/// Coplanar inputs are accepted; the reflection ambiguity is resolved by
/// flipping the least significant singular direction so that `det R = +1`.
pub fn kabsch_align(
    source: &[AugmentedPoint],
    target: &[AugmentedPoint],
    correspondences: &[(usize, usize)],
) -> Result<Pose, KabschError> {
    let mut pairs = alloc::vec::Vec::with_capacity(correspondences.len());
    for &(i, j) in correspondences {
        let u = source.get(i).ok_or(KabschError::IndexOutOfRange { index: i })?;
        let v = target.get(j).ok_or(KabschError::IndexOutOfRange { index: j })?;
        pairs.push((*u, *v));
    }
    kabsch_pairs(&pairs)
}

/// [`kabsch_align`] on already-paired points `(source, target)`.
pub fn kabsch_pairs(pairs: &[(AugmentedPoint, AugmentedPoint)]) -> Result<Pose, KabschError> {
    let n = pairs.len();
    if n < 3 {
        return Err(KabschError::DegenerateCorrespondences { pairs: n, rank: 0 });
    }
    let inv_n = 1.0 / n as f64;
    let src_centroid = pairs.iter().fold(Vector3::zeros(), |acc, (u, _)| acc + u.0) * inv_n;
    let dst_centroid = pairs.iter().fold(Vector3::zeros(), |acc, (_, v)| acc + v.0) * inv_n;

    let mut h = Matrix3::zeros();
    for (u, v) in pairs {
        h += (u.0 - src_centroid) * (v.0 - dst_centroid).transpose();
    }

    let svd = h.svd(true, true);
    let sv = svd.singular_values;
    let largest = sv.max();
    let rank = sv.iter().filter(|&&s| s > RANK_TOL * largest.max(f64::MIN_POSITIVE)).count();
    if largest <= 0.0 || rank < 2 {
        return Err(KabschError::DegenerateCorrespondences { pairs: n, rank });
    }
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(KabschError::DegenerateCorrespondences { pairs: n, rank }),
    };

    // nalgebra orders singular values descending only after sorting; find the
    // smallest explicitly so the sign flip lands on the weakest direction.
    let v = v_t.transpose();
    let u_t = u.transpose();
    let mut d = Matrix3::identity();
    if (v * u_t).determinant() < 0.0 {
        let weakest = sv.imin();
        d[(weakest, weakest)] = -1.0;
    }
    let rotation = v * d * u_t;
    let translation = dst_centroid - rotation * src_centroid;
    Pose::new(rotation, translation)
        .ok_or(KabschError::DegenerateCorrespondences { pairs: n, rank })
}

/// Sum of squared corresponded-pair distances after applying `pose` to the
/// source side.
pub fn alignment_residual(pose: &Pose, pairs: &[(AugmentedPoint, AugmentedPoint)]) -> f64 {
    pairs
        .iter()
        .map(|(u, v)| (pose.transform_point(u).0 - v.0).norm_squared())
        .sum()
}
