//! Familiarity-classifier navigation: a small feed-forward network learns to
//! tell route-facing views from rotated ones, and headings are recovered by
//! scanning rotations for the most familiar view.

mod io;
mod net;
mod search;

pub use io::{load_model, model_from_bytes, model_to_bytes, save_model};
pub use net::{gradient_check, kink_margin, train, Activation, Layer, MlpConfig, MlpModel, Solver};
pub use search::{
    classify_report, cross_validate, grid_search, stratified_folds, ClassMetrics,
    ClassificationReport, SearchResult, SearchSpace,
};

use rayon::prelude::*;

use crate::compass::{heading_error, idf, ScanArc};
use crate::imgcore::{preprocess, Panorama, PreprocessConfig};
use crate::perfectmem::{nearest_snapshot, CellResult, RouteErrorStats, SnapshotStore};
use crate::world::{normalize_heading, GridCell, Route};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledView {
    /// Preprocessed panorama pixels, row-major.
    pub features: Vec<f64>,
    /// 1 for a route-facing view, 0 for a rotated one.
    pub label: u8,
    /// (route index, rotation applied in degrees)
    pub origin: (usize, f64),
}

impl LabeledView {
    pub fn is_positive(&self) -> bool {
        self.label == 1
    }
}

/// Denser sampling wherever the route turns sharply.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CornerBoost {
    pub threshold_deg: f64,
    pub frequency: usize,
}

pub const DEFAULT_CORNER_THRESHOLD: f64 = 15.0;
pub const DEFAULT_NEGATIVE_ANGLE: f64 = 60.0;

/// Waypoints within `reach` indices of one whose turn angle exceeds
/// `threshold_deg`.
pub fn corner_zone(route: &Route, threshold_deg: f64, reach: usize) -> Vec<bool> {
    let turns = route.turn_angles();
    let mut zone = vec![false; route.len()];
    for (i, t) in turns.iter().enumerate() {
        if *t > threshold_deg {
            let lo = i.saturating_sub(reach);
            let hi = (i + reach).min(route.len() - 1);
            zone[lo..=hi].iter_mut().for_each(|z| *z = true);
        }
    }
    zone
}

/// Route indices kept for training: every `n`-th, or every boosted-n-th
/// inside the corner zone (waypoints within `n` of a sharp turn).
pub fn retained_indices(route: &Route, n: usize, boost: Option<CornerBoost>) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::invalid("snapshot frequency must be >= 1"));
    }
    if route.is_empty() {
        return Err(Error::Empty("route has no snapshots".into()));
    }
    let zone = match boost {
        Some(b) if b.frequency == 0 => return Err(Error::invalid("corner frequency must be >= 1")),
        Some(b) => corner_zone(route, b.threshold_deg, n),
        None => vec![false; route.len()],
    };
    let mut out = Vec::new();
    let mut i = 0;
    while i < route.len() {
        out.push(i);
        i += match boost {
            Some(b) if zone[i] => b.frequency,
            _ => n,
        };
    }
    Ok(out)
}

/// One positive and one rotated negative per index. Negatives alternate
/// between `+angle` and `-angle`, starting with `+angle`.
pub fn labeled_views(
    route: &Route,
    indices: &[usize],
    cfg: &PreprocessConfig,
    negative_angle: f64,
) -> Result<Vec<LabeledView>> {
    if !(negative_angle > 0.0 && negative_angle < 180.0) {
        return Err(Error::invalid("negative angle must lie in (0, 180)"));
    }
    let pairs = indices
        .par_iter()
        .enumerate()
        .map(|(ordinal, &i)| {
            let snap = route
                .snapshots
                .get(i)
                .ok_or_else(|| Error::invalid(format!("route index {i} out of range")))?;
            let p = preprocess(snap, cfg)?;
            let shift = (negative_angle / p.step_deg()).round() as i64;
            let shift = if ordinal % 2 == 0 { shift } else { -shift };
            let negative = p.rotate(shift);
            Ok([
                LabeledView {
                    features: p.into_pixels(),
                    label: 1,
                    origin: (i, 0.0),
                },
                LabeledView {
                    features: negative.pixels().to_vec(),
                    label: 0,
                    origin: (i, shift as f64 * negative.step_deg()),
                },
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pairs.into_iter().flatten().collect())
}

pub fn make_training_set(
    route: &Route,
    n: usize,
    cfg: &PreprocessConfig,
    negative_angle: f64,
    boost: Option<CornerBoost>,
) -> Result<Vec<LabeledView>> {
    let indices = retained_indices(route, n, boost)?;
    labeled_views(route, &indices, cfg, negative_angle)
}

/// Midpoints between consecutive training indices.
pub fn held_out_indices(training: &[usize]) -> Result<Vec<usize>> {
    let mids: Vec<usize> = training
        .windows(2)
        .filter(|w| w[1] >= w[0] + 2)
        .map(|w| (w[0] + w[1]) / 2)
        .collect();
    if mids.is_empty() {
        return Err(Error::Empty("no held-out snapshots".into()));
    }
    Ok(mids)
}

pub fn make_test_set(
    route: &Route,
    training: &[usize],
    cfg: &PreprocessConfig,
    negative_angle: f64,
) -> Result<Vec<LabeledView>> {
    labeled_views(route, &held_out_indices(training)?, cfg, negative_angle)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfidenceCurve {
    pub scores: Vec<f64>,
    /// Column shift scored by each entry.
    pub shifts: Vec<usize>,
    pub step_deg: f64,
    pub arc_start_deg: f64,
    pub arc_len_deg: f64,
}

impl ConfidenceCurve {
    pub fn angle(&self, i: usize) -> f64 {
        self.shifts[i] as f64 * self.step_deg
    }

    pub fn max(&self) -> f64 {
        self.scores
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Scores every rotation inside `arc` and returns the curve together with
/// the rotation (degrees) of highest confidence; ties go to the rotation
/// met first from the arc start.
pub fn scan_confidence(
    model: &MlpModel,
    view: &Panorama,
    cfg: &PreprocessConfig,
    arc: ScanArc,
) -> Result<(ConfidenceCurve, f64)> {
    let p = preprocess(view, cfg)?;
    scan_preprocessed(model, &p, arc)
}

fn scan_preprocessed(
    model: &MlpModel,
    p: &Panorama,
    arc: ScanArc,
) -> Result<(ConfidenceCurve, f64)> {
    let shifts = arc.shifts(p.width())?;
    let scores = shifts
        .iter()
        .map(|&k| model.predict(p.rotate(k as i64).pixels()))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    let curve = ConfidenceCurve {
        scores,
        shifts,
        step_deg: p.step_deg(),
        arc_start_deg: arc.start_deg,
        arc_len_deg: arc.len_deg,
    };
    let heading = curve.angle(best);
    Ok((curve, heading))
}

/// 180° or 90° arcs around the route's overall direction of travel.
pub fn forward_arc(route: &Route, len_deg: f64) -> ScanArc {
    ScanArc::centered(route.general_direction(), len_deg)
}

/// Scores classifier headings at `cells` against the nearest snapshot of
/// `reference`. `arc` is absolute; it is re-expressed for each cell's own
/// heading before scanning.
pub fn evaluate_headings(
    model: &MlpModel,
    cfg: &PreprocessConfig,
    reference: &SnapshotStore,
    cells: &[&GridCell],
    arc: ScanArc,
) -> Result<RouteErrorStats> {
    let per_cell = cells
        .par_iter()
        .map(|cell| {
            let (curve, rotation) =
                scan_confidence(model, &cell.view, cfg, arc.relative_to(cell.pose.heading()))?;
            let snap = &reference.snapshots()[nearest_snapshot(reference, &cell.pose)];
            let recovered = normalize_heading(cell.pose.heading() + rotation);
            Ok(CellResult {
                pose: cell.pose,
                matched_index: snap.index,
                reference_index: snap.index,
                reference_heading: snap.pose.heading(),
                recovered_heading: recovered,
                error: heading_error(snap.pose.heading(), recovered),
                weight: 1.0 - curve.max(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    RouteErrorStats::from_cells(per_cell)
}

/// `idf` between each pair of consecutive route snapshots in `segment`,
/// after preprocessing.
pub fn corner_rate_of_change(
    route: &Route,
    segment: std::ops::Range<usize>,
    cfg: &PreprocessConfig,
) -> Result<Vec<f64>> {
    if segment.end > route.len() || segment.len() < 2 {
        return Err(Error::invalid(format!(
            "segment {segment:?} invalid for a route of {} snapshots",
            route.len()
        )));
    }
    let views = route.snapshots[segment]
        .par_iter()
        .map(|s| preprocess(s, cfg))
        .collect::<Result<Vec<_>>>()?;
    views.windows(2).map(|w| idf(&w[0], &w[1])).collect()
}
