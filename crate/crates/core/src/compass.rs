//! Visual compass: root-mean-square image difference and exhaustive
//! rotational search for the best-matching heading.

use rayon::prelude::*;

use crate::imgcore::Panorama;
use crate::world::{normalize_heading, Pose, WorldGrid};
use crate::{Error, Result};

/// Root-mean-square pixel difference between two equally sized views.
///
/// Squared differences are summed along each row in column order and the
/// row sums are then added in row order; [`scan`] reproduces exactly this
/// order so the two agree bit for bit.
pub fn idf(current: &Panorama, goal: &Panorama) -> Result<f64> {
    check_dims(current, goal)?;
    let w = current.width();
    let mut total = 0.0;
    for (c_row, g_row) in current
        .pixels()
        .chunks_exact(w)
        .zip(goal.pixels().chunks_exact(w))
    {
        let mut acc = 0.0;
        for (c, g) in c_row.iter().zip(g_row) {
            let d = c - g;
            acc += d * d;
        }
        total += acc;
    }
    Ok((total / current.pixels().len() as f64).sqrt())
}

fn check_dims(a: &Panorama, b: &Panorama) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            expected: b.dims(),
            got: a.dims(),
        });
    }
    Ok(())
}

/// Circular heading error in `[0, 180]`.
pub fn heading_error(hs: f64, hr: f64) -> f64 {
    let d = (hs - hr).abs().rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Plain `|hs - hr|` without wrap-around, for strict comparisons.
pub fn heading_error_literal(hs: f64, hr: f64) -> f64 {
    (hs - hr).abs()
}

/// An arc of rotation angles `[start, start + len)`, in degrees.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanArc {
    pub start_deg: f64,
    pub len_deg: f64,
}

impl ScanArc {
    pub const FULL: ScanArc = ScanArc {
        start_deg: 0.0,
        len_deg: 360.0,
    };

    pub fn new(start_deg: f64, len_deg: f64) -> Self {
        Self { start_deg, len_deg }
    }

    /// Arc of `len_deg` centred on `direction_deg`.
    pub fn centered(direction_deg: f64, len_deg: f64) -> Self {
        Self::new(normalize_heading(direction_deg - len_deg / 2.0), len_deg)
    }

    /// The same absolute arc expressed as rotations of a view taken facing
    /// `heading`.
    pub fn relative_to(&self, heading: f64) -> Self {
        if self.len_deg >= 360.0 {
            return *self;
        }
        Self::new(normalize_heading(self.start_deg - heading), self.len_deg)
    }

    pub fn contains(&self, angle_deg: f64) -> bool {
        self.len_deg >= 360.0 || (angle_deg - self.start_deg).rem_euclid(360.0) < self.len_deg
    }

    /// Column shifts whose angle lies inside the arc, in arc order starting
    /// from the arc start.
    pub fn shifts(&self, width: usize) -> Result<Vec<usize>> {
        if !(self.len_deg > 0.0 && self.len_deg <= 360.0) {
            return Err(Error::invalid(format!(
                "scan arc length {} must lie in (0, 360]",
                self.len_deg
            )));
        }
        let step = 360.0 / width as f64;
        let mut offsets: Vec<(f64, usize)> = (0..width)
            .filter_map(|k| {
                let off = (k as f64 * step - self.start_deg).rem_euclid(360.0);
                (self.len_deg >= 360.0 || off < self.len_deg).then_some((off, k))
            })
            .collect();
        if offsets.is_empty() {
            return Err(Error::Empty(format!(
                "no rotation step of {step}° falls inside the arc [{}, +{})",
                self.start_deg, self.len_deg
            )));
        }
        offsets.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Ok(offsets.into_iter().map(|(_, k)| k).collect())
    }
}

/// Difference as a function of rotation over a scanned arc.
#[derive(Clone, Debug, PartialEq)]
pub struct IdfCurve {
    pub rms: Vec<f64>,
    /// Column shift evaluated at each entry of `rms`.
    pub shifts: Vec<usize>,
    pub step_deg: f64,
    pub arc_start_deg: f64,
    pub arc_len_deg: f64,
}

impl IdfCurve {
    pub fn angle(&self, i: usize) -> f64 {
        self.shifts[i] as f64 * self.step_deg
    }

    pub fn angles(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.rms.len()).map(|i| self.angle(i))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeadingRecovery {
    /// Rotation of the current view, in degrees, that best matches the goal.
    pub recovered_heading: f64,
    pub shift: usize,
    pub min_rms: f64,
    pub curve: IdfCurve,
}

/// Column-major copy so a rotated view is two contiguous runs.
#[derive(Clone, Debug)]
pub(crate) struct ColumnMajor {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ColumnMajor {
    pub(crate) fn new(p: &Panorama) -> Self {
        let (w, h) = p.dims();
        let mut data = vec![0.0; w * h];
        for r in 0..h {
            for (c, v) in p.row(r).iter().enumerate() {
                data[c * h + r] = *v;
            }
        }
        Self {
            width: w,
            height: h,
            data,
        }
    }

    fn column(&self, c: usize) -> &[f64] {
        &self.data[c * self.height..(c + 1) * self.height]
    }

    /// Same value as `idf(&current.rotate(k), goal)`, same rounding.
    pub(crate) fn rotated_idf(&self, goal: &ColumnMajor, k: usize, acc: &mut [f64]) -> f64 {
        let w = self.width;
        acc.iter_mut().for_each(|a| *a = 0.0);
        for j in 0..w {
            let src = if j + k >= w { j + k - w } else { j + k };
            for ((a, c), g) in acc.iter_mut().zip(self.column(src)).zip(goal.column(j)) {
                let d = c - g;
                *a += d * d;
            }
        }
        let mut total = 0.0;
        for a in acc.iter() {
            total += *a;
        }
        (total / (w * self.height) as f64).sqrt()
    }

    /// Sum of squared differences for shift `k`, or `None` as soon as a
    /// partial sum exceeds `bound`. Partial sums never exceed the final one,
    /// so an abandoned shift cannot beat `bound`.
    pub(crate) fn rotated_sse_bounded(
        &self,
        goal: &ColumnMajor,
        k: usize,
        acc: &mut [f64],
        bound: f64,
    ) -> Option<f64> {
        const CHECK_EVERY: usize = 8;
        let w = self.width;
        acc.iter_mut().for_each(|a| *a = 0.0);
        for j in 0..w {
            let src = if j + k >= w { j + k - w } else { j + k };
            for ((a, c), g) in acc.iter_mut().zip(self.column(src)).zip(goal.column(j)) {
                let d = c - g;
                *a += d * d;
            }
            if j % CHECK_EVERY == CHECK_EVERY - 1 && acc.iter().sum::<f64>() > bound {
                return None;
            }
        }
        let mut total = 0.0;
        for a in acc.iter() {
            total += *a;
        }
        Some(total)
    }

    pub(crate) fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub(crate) fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

/// Evaluates the difference of every rotation of `current` inside `arc`
/// against `goal` and returns the best one. Ties go to the rotation that
/// comes first in the arc.
pub fn scan(current: &Panorama, goal: &Panorama, arc: ScanArc) -> Result<HeadingRecovery> {
    check_dims(current, goal)?;
    let shifts = arc.shifts(current.width())?;
    let cur = ColumnMajor::new(current);
    let gl = ColumnMajor::new(goal);
    Ok(scan_prepared(&cur, &gl, &shifts, arc))
}

pub(crate) fn scan_prepared(
    cur: &ColumnMajor,
    goal: &ColumnMajor,
    shifts: &[usize],
    arc: ScanArc,
) -> HeadingRecovery {
    let mut acc = vec![0.0; cur.height];
    let rms: Vec<f64> = shifts
        .iter()
        .map(|&k| cur.rotated_idf(goal, k, &mut acc))
        .collect();
    let mut best = 0;
    for (i, v) in rms.iter().enumerate() {
        if *v < rms[best] {
            best = i;
        }
    }
    let step = 360.0 / cur.width as f64;
    HeadingRecovery {
        recovered_heading: shifts[best] as f64 * step,
        shift: shifts[best],
        min_rms: rms[best],
        curve: IdfCurve {
            rms,
            shifts: shifts.to_vec(),
            step_deg: step,
            arc_start_deg: arc.start_deg,
            arc_len_deg: arc.len_deg,
        },
    }
}

/// One grid cell compared against a single reference snapshot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceError {
    pub pose: Pose,
    pub distance: f64,
    pub recovered_heading: f64,
    pub min_rms: f64,
    pub error: f64,
}

/// Heading error of every grid cell within `max_dist` of the snapshot,
/// recovered by a full-circle scan against it. Cells keep grid order.
pub fn error_vs_distance(
    grid: &WorldGrid,
    snapshot: (&Pose, &Panorama),
    max_dist: f64,
) -> Result<Vec<DistanceError>> {
    if !(max_dist > 0.0) {
        return Err(Error::invalid("max_dist must be positive"));
    }
    let (ref_pose, ref_view) = snapshot;
    let goal = ColumnMajor::new(ref_view);
    let shifts = ScanArc::FULL.shifts(ref_view.width())?;
    let cells: Vec<_> = grid
        .cells
        .iter()
        .filter(|c| c.pose.distance(ref_pose) <= max_dist)
        .collect();
    if cells.is_empty() {
        return Err(Error::Empty(format!(
            "no grid cell within {max_dist} mm of the snapshot"
        )));
    }
    cells
        .par_iter()
        .map(|cell| {
            check_dims(&cell.view, ref_view)?;
            let rec = scan_prepared(&ColumnMajor::new(&cell.view), &goal, &shifts, ScanArc::FULL);
            let recovered = normalize_heading(cell.pose.heading() + rec.recovered_heading);
            Ok(DistanceError {
                pose: cell.pose,
                distance: cell.pose.distance(ref_pose),
                recovered_heading: recovered,
                min_rms: rec.min_rms,
                error: heading_error(ref_pose.heading(), recovered),
            })
        })
        .collect()
}
