//! Planar Bézier evaluation.

use alloc::vec::Vec;

use nalgebra::Vector2;

/// Point on the curve by de Casteljau's algorithm.
pub fn point(control: &[Vector2<f64>], s: f64) -> Vector2<f64> {
    let mut work: Vec<Vector2<f64>> = control.to_vec();
    let n = work.len();
    for level in 1..n {
        for i in 0..n - level {
            work[i] = work[i] * (1.0 - s) + work[i + 1] * s;
        }
    }
    work.first().copied().unwrap_or_else(Vector2::zeros)
}

/// Control polygon of the derivative curve.
pub fn hodograph(control: &[Vector2<f64>]) -> Vec<Vector2<f64>> {
    let degree = control.len().saturating_sub(1) as f64;
    control.windows(2).map(|w| (w[1] - w[0]) * degree).collect()
}

pub fn derivative(control: &[Vector2<f64>], s: f64) -> Vector2<f64> {
    if control.len() < 2 {
        return Vector2::zeros();
    }
    point(&hodograph(control), s)
}

/// Unit tangent; falls back to the second derivative where the first
/// vanishes (cusp-like control polygons) and to the chord as a last resort.
pub fn unit_tangent(control: &[Vector2<f64>], s: f64) -> Vector2<f64> {
    let d = derivative(control, s);
    if d.norm() > 1e-9 {
        return d.normalize();
    }
    let h = hodograph(control);
    let dd = derivative(&h, s);
    if dd.norm() > 1e-9 {
        // Direction of travel just past the stationary point.
        let sign = if s < 1.0 { 1.0 } else { -1.0 };
        return (dd * sign).normalize();
    }
    let chord = control.last().copied().unwrap_or_default() - control.first().copied().unwrap_or_default();
    if chord.norm() > 0.0 {
        chord.normalize()
    } else {
        Vector2::x()
    }
}

/// Radius of curvature; infinite where the curve is straight.
pub fn curvature_radius(control: &[Vector2<f64>], s: f64) -> f64 {
    let d = derivative(control, s);
    let dd = derivative(&hodograph(control), s);
    let turn = (d.x * dd.y - d.y * dd.x).abs();
    let speed = d.norm();
    if turn == 0.0 {
        return if speed == 0.0 { 0.0 } else { f64::INFINITY };
    }
    speed * speed * speed / turn
}

/// Uniform-parameter polyline with `segments + 1` vertices.
pub fn polyline(control: &[Vector2<f64>], segments: usize) -> Vec<Vector2<f64>> {
    (0..=segments)
        .map(|k| point(control, k as f64 / segments as f64))
        .collect()
}
