//! Marker-based contact representation and the stable-contact functionals.
//!
//! A pad carries a labeled marker grid lying in its `x = 0` plane at rest.
//! The x-displacement of a marker is its normal deformation ΔN; the in-plane
//! displacement against the rest grid is its shear ΔS. Contact sets keep
//! only markers whose |ΔN| clears an adaptive threshold ε, and marker ids
//! provide frame-to-frame correspondence.

use alloc::vec::Vec;

use num_traits::Float;

use crate::se3::AugmentedPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MarkerId(pub u32);

impl MarkerId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ContactError {
    #[error("no contact: fewer than {min_points} markers clear the floor threshold ({found} found)")]
    NoContact { min_points: usize, found: usize },
    #[error("contact set is empty")]
    EmptyContact,
    #[error("contact sets share no marker ids")]
    NoCorrespondence,
    #[error("marker {0:?} missing from observation")]
    MissingMarker(MarkerId),
    #[error("marker {0:?} is not part of the rest grid")]
    UnknownMarker(MarkerId),
    #[error("min_points {min_points} must be >= 3 and exceed the longest grid line ({line})")]
    InvalidMinPoints { min_points: usize, line: usize },
    #[error("calibration needs at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("calibration sample {index} is invalid (ΔN must be positive and distinct)")]
    InvalidSample { index: usize },
}

/// Labeled markers of one pad at rest, in the pad frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkerGrid {
    markers: Vec<AugmentedPoint>,
    rows: usize,
    cols: usize,
    pad_id: u8,
    pitch: f64,
}

impl MarkerGrid {
    /// Regular `rows × cols` grid centered on the pad origin. Columns run
    /// along the pad y axis and rows along z; ids are assigned row-major.
    pub fn new(rows: usize, cols: usize, pitch: f64, pad_id: u8) -> Self {
        let y0 = (cols as f64 - 1.0) * 0.5;
        let z0 = (rows as f64 - 1.0) * 0.5;
        let markers = (0..rows)
            .flat_map(|i| {
                (0..cols).map(move |j| AugmentedPoint::new(0.0, (j as f64 - y0) * pitch, (i as f64 - z0) * pitch))
            })
            .collect();
        Self {
            markers,
            rows,
            cols,
            pad_id,
            pitch,
        }
    }

    pub fn square(n: usize, pitch: f64, pad_id: u8) -> Self {
        Self::new(n, n, pitch, pad_id)
    }

    pub fn markers(&self) -> &[AugmentedPoint] {
        &self.markers
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn pad_id(&self) -> u8 {
        self.pad_id
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn len(&self) -> usize {
        self.markers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.markers.is_empty()
    }

    pub fn rest(&self, id: MarkerId) -> Option<&AugmentedPoint> {
        self.markers.get(id.index())
    }

    pub fn ids(&self) -> impl Iterator<Item = MarkerId> + '_ {
        (0..self.markers.len()).map(|i| MarkerId(i as u32))
    }

    /// Smallest member count that guarantees a non-colinear contact set.
    pub fn default_min_points(&self) -> usize {
        self.rows.max(self.cols).max(2) + 1
    }

    /// Rest grid as an observation (every marker undeformed).
    pub fn as_observation(&self) -> Vec<(MarkerId, AugmentedPoint)> {
        self.ids().zip(self.markers.iter().copied()).collect()
    }
}

/// Descending candidate thresholds for the adaptive ε search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonLadder {
    pub start: f64,
    pub step: f64,
    pub floor: f64,
}

impl Default for EpsilonLadder {
    fn default() -> Self {
        Self {
            start: 2.0,
            step: 0.05,
            floor: 0.05,
        }
    }
}

impl EpsilonLadder {
    /// Rungs from `start` down to `floor`, each computed directly from its
    /// index so no step error accumulates.
    pub fn rungs(&self) -> impl Iterator<Item = f64> + '_ {
        let count = ((self.start - self.floor) / self.step + 1e-9) as usize + 1;
        (0..count).map(move |k| self.start - k as f64 * self.step)
    }
}

/// Markers in contact, positioned in the current pad frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactSet {
    pub points: Vec<(MarkerId, AugmentedPoint)>,
    pub epsilon_used: f64,
}

impl ContactSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn get(&self, id: MarkerId) -> Option<&AugmentedPoint> {
        // Points are kept sorted by id.
        self.points
            .binary_search_by_key(&id, |(m, _)| *m)
            .ok()
            .map(|i| &self.points[i].1)
    }

    pub fn ids(&self) -> impl Iterator<Item = MarkerId> + '_ {
        self.points.iter().map(|(id, _)| *id)
    }

    /// Corresponding pairs `(self, other)` over shared marker ids.
    pub fn pairs_with<'a>(&'a self, other: &'a ContactSet) -> impl Iterator<Item = (MarkerId, AugmentedPoint, AugmentedPoint)> + 'a {
        self.points
            .iter()
            .filter_map(move |(id, u)| other.get(*id).map(|v| (*id, *u, *v)))
    }
}

/// Worst-case deformation statistics of a contact.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DeviationSummary {
    pub max_normal: f64,
    pub max_shear: f64,
    pub max_slip_ratio: f64,
    pub mean_pair_distance: f64,
}

impl DeviationSummary {
    /// Field-wise maximum; the worse pad binds.
    pub fn worst(&self, other: &DeviationSummary) -> DeviationSummary {
        DeviationSummary {
            max_normal: self.max_normal.max(other.max_normal),
            max_shear: self.max_shear.max(other.max_shear),
            max_slip_ratio: self.max_slip_ratio.max(other.max_slip_ratio),
            mean_pair_distance: self.mean_pair_distance.max(other.mean_pair_distance),
        }
    }
}

fn normal_deformation(point: &AugmentedPoint, rest: &AugmentedPoint) -> f64 {
    (point.x() - rest.x()).abs()
}

fn shear_deformation(point: &AugmentedPoint, rest: &AugmentedPoint) -> f64 {
    let dy = point.y() - rest.y();
    let dz = point.z() - rest.z();
    Float::sqrt(dy * dy + dz * dz)
}

/// Selects the contact set with the largest ladder threshold ε that still
/// yields at least `min_points` members.
pub fn detect_contact(
    rest: &MarkerGrid,
    deformed: &[(MarkerId, AugmentedPoint)],
    min_points: usize,
    ladder: &EpsilonLadder,
) -> Result<ContactSet, ContactError> {
    let line = rest.rows.max(rest.cols);
    if min_points < 3 || min_points <= line {
        return Err(ContactError::InvalidMinPoints { min_points, line });
    }

    let mut normals: Vec<(MarkerId, AugmentedPoint, f64)> = Vec::with_capacity(deformed.len());
    let mut seen = alloc::vec![false; rest.len()];
    for (id, p) in deformed {
        let r = rest.rest(*id).ok_or(ContactError::UnknownMarker(*id))?;
        seen[id.index()] = true;
        normals.push((*id, *p, normal_deformation(p, r)));
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(ContactError::MissingMarker(MarkerId(missing as u32)));
    }

    let mut found = 0;
    for eps in ladder.rungs() {
        found = normals.iter().filter(|(_, _, dn)| *dn >= eps).count();
        if found >= min_points {
            let mut points: Vec<_> = normals
                .iter()
                .filter(|(_, _, dn)| *dn >= eps)
                .map(|(id, p, _)| (*id, *p))
                .collect();
            points.sort_by_key(|(id, _)| *id);
            points.dedup_by_key(|(id, _)| *id);
            return Ok(ContactSet {
                points,
                epsilon_used: eps,
            });
        }
    }
    Err(ContactError::NoContact { min_points, found })
}

/// Elastic functional: `(max |ΔN|, max ΔS)` over the contact members.
pub fn f_e(current: &ContactSet, rest: &MarkerGrid) -> Result<(f64, f64), ContactError> {
    if current.is_empty() {
        return Err(ContactError::EmptyContact);
    }
    let mut max_normal: f64 = 0.0;
    let mut max_shear: f64 = 0.0;
    for (id, p) in &current.points {
        let r = rest.rest(*id).ok_or(ContactError::UnknownMarker(*id))?;
        max_normal = max_normal.max(normal_deformation(p, r));
        max_shear = max_shear.max(shear_deformation(p, r));
    }
    Ok((max_normal, max_shear))
}

/// Slip functional: `max ΔS / ΔN` over the contact members.
pub fn f_s(current: &ContactSet, rest: &MarkerGrid) -> Result<f64, ContactError> {
    if current.is_empty() {
        return Err(ContactError::EmptyContact);
    }
    let mut ratio: f64 = 0.0;
    for (id, p) in &current.points {
        let r = rest.rest(*id).ok_or(ContactError::UnknownMarker(*id))?;
        let dn = normal_deformation(p, r);
        if dn > 0.0 {
            ratio = ratio.max(shear_deformation(p, r) / dn);
        }
    }
    Ok(ratio)
}

/// Deviation functional: mean Euclidean distance over corresponded pairs.
pub fn f_d(current: &ContactSet, reference: &ContactSet) -> Result<f64, ContactError> {
    let (sum, n) = current
        .pairs_with(reference)
        .fold((0.0, 0usize), |(s, n), (_, u, v)| (s + u.distance(&v), n + 1));
    if n == 0 {
        return Err(ContactError::NoCorrespondence);
    }
    Ok(sum / n as f64)
}

/// All three functionals for one pad.
pub fn summarize(
    current: &ContactSet,
    rest: &MarkerGrid,
    reference: &ContactSet,
) -> Result<DeviationSummary, ContactError> {
    let (max_normal, max_shear) = f_e(current, rest)?;
    Ok(DeviationSummary {
        max_normal,
        max_shear,
        max_slip_ratio: f_s(current, rest)?,
        mean_pair_distance: f_d(current, reference)?,
    })
}

/// Per-pad summaries combined so the worse pad binds each metric.
pub fn summarize_pads(
    current: &[ContactSet],
    rest: &[MarkerGrid],
    reference: &[ContactSet],
) -> Result<DeviationSummary, ContactError> {
    let mut out: Option<DeviationSummary> = None;
    for ((c, g), r) in current.iter().zip(rest).zip(reference) {
        let s = summarize(c, g, r)?;
        out = Some(match out {
            Some(prev) => prev.worst(&s),
            None => s,
        });
    }
    out.ok_or(ContactError::EmptyContact)
}

pub const MIN_CALIBRATION_SAMPLES: usize = 3;

/// Slip-threshold calibration from a pull-off log of `(ΔN, peak ΔS)`
/// samples: the lower envelope `min peak_shear / ΔN`.
///
/// `min_samples` is clamped to at least 2; a single ratio is never accepted.
pub fn calibrate_delta0_with(pull_log: &[(f64, f64)], min_samples: usize) -> Result<f64, ContactError> {
    let needed = min_samples.max(2);
    if pull_log.len() < needed {
        return Err(ContactError::InsufficientSamples {
            needed,
            got: pull_log.len(),
        });
    }
    let mut best = f64::INFINITY;
    for (index, &(dn, shear)) in pull_log.iter().enumerate() {
        let duplicate = pull_log[..index].iter().any(|&(other, _)| other == dn);
        if !(dn > 0.0) || !(shear >= 0.0) || duplicate {
            return Err(ContactError::InvalidSample { index });
        }
        best = best.min(shear / dn);
    }
    Ok(best)
}

pub fn calibrate_delta0(pull_log: &[(f64, f64)]) -> Result<f64, ContactError> {
    calibrate_delta0_with(pull_log, MIN_CALIBRATION_SAMPLES)
}
