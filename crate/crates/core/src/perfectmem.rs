//! Perfect Memory: match a view against every stored route snapshot and
//! take the best (snapshot, rotation) pair.

use rayon::prelude::*;

use crate::compass::{heading_error, scan_prepared, ColumnMajor, HeadingRecovery, ScanArc};
use crate::imgcore::{preprocess, Panorama, PreprocessConfig};
use crate::stats::{lower_median, mean, BoxSummary};
use crate::world::{normalize_heading, GridCell, Pose, Route, WorldGrid};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct StoredSnapshot {
    /// Position of the snapshot along the route.
    pub index: usize,
    pub pose: Pose,
    pub view: Panorama,
    prepared: ColumnMajor,
}

/// Preprocessed snapshots retained from a training route. Immutable once built.
#[derive(Clone, Debug)]
pub struct SnapshotStore {
    snapshots: Vec<StoredSnapshot>,
    cfg: PreprocessConfig,
    frequency: usize,
    route_path: Vec<(f64, f64)>,
}

impl SnapshotStore {
    /// Keeps the route snapshots at `indices`, which must be strictly increasing.
    pub fn from_indices(route: &Route, indices: &[usize], cfg: PreprocessConfig) -> Result<Self> {
        cfg.validate()?;
        if indices.is_empty() {
            return Err(Error::Empty("snapshot store has no snapshots".into()));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) || *indices.last().unwrap() >= route.len() {
            return Err(Error::invalid(format!(
                "snapshot indices must be increasing and below {}",
                route.len()
            )));
        }
        let snapshots = indices
            .par_iter()
            .map(|&i| {
                let view = preprocess(&route.snapshots[i], &cfg)?;
                Ok(StoredSnapshot {
                    index: i,
                    pose: route.waypoints[i],
                    prepared: ColumnMajor::new(&view),
                    view,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let frequency = match indices {
            [a, b, ..] => b - a,
            _ => route.len().max(1),
        };
        Ok(Self {
            snapshots,
            cfg,
            frequency,
            route_path: route.positions(),
        })
    }

    pub fn snapshots(&self) -> &[StoredSnapshot] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn cfg(&self) -> &PreprocessConfig {
        &self.cfg
    }

    pub fn frequency(&self) -> usize {
        self.frequency
    }

    /// Positions of every waypoint of the source route, retained or not.
    pub fn route_path(&self) -> &[(f64, f64)] {
        &self.route_path
    }

    pub fn view_dims(&self) -> (usize, usize) {
        self.snapshots[0].view.dims()
    }
}

/// Retains route snapshots `0, n, 2n, …`, each preprocessed with `cfg`.
pub fn build_store(
    route: &Route,
    frequency: usize,
    cfg: PreprocessConfig,
) -> Result<SnapshotStore> {
    if frequency == 0 {
        return Err(Error::invalid("snapshot frequency must be >= 1"));
    }
    if route.is_empty() {
        return Err(Error::Empty("route has no snapshots".into()));
    }
    let indices: Vec<usize> = (0..route.len()).step_by(frequency).collect();
    let mut store = SnapshotStore::from_indices(route, &indices, cfg)?;
    store.frequency = frequency;
    Ok(store)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MemoryMatch {
    /// Position within the store.
    pub slot: usize,
    /// Route index of the matched snapshot.
    pub route_index: usize,
    /// Full-circle scan against the matched snapshot.
    pub recovery: HeadingRecovery,
}

/// Best (snapshot, rotation) pair for an already preprocessed view. Ties go
/// to the earlier snapshot, then to the smaller rotation.
pub fn recover(store: &SnapshotStore, current: &Panorama) -> Result<MemoryMatch> {
    if current.dims() != store.view_dims() {
        return Err(Error::DimensionMismatch {
            expected: store.view_dims(),
            got: current.dims(),
        });
    }
    Ok(recover_prepared(store, &ColumnMajor::new(current)))
}

fn recover_prepared(store: &SnapshotStore, cur: &ColumnMajor) -> MemoryMatch {
    let (w, h) = cur.dims();
    let shifts: Vec<usize> = (0..w).collect();
    let pixels = cur.pixel_count() as f64;
    let mut acc = vec![0.0; h];
    // (slot, rms, sum of squares)
    let mut best: Option<(usize, f64, f64)> = None;
    for (slot, snap) in store.snapshots.iter().enumerate() {
        for &k in &shifts {
            let bound = best.map_or(f64::INFINITY, |b| b.2);
            if let Some(total) = cur.rotated_sse_bounded(&snap.prepared, k, &mut acc, bound) {
                let rms = (total / pixels).sqrt();
                if best.is_none_or(|b| rms < b.1) {
                    best = Some((slot, rms, total));
                }
            }
        }
    }
    let slot = best.expect("store is never empty").0;
    let snap = &store.snapshots[slot];
    MemoryMatch {
        slot,
        route_index: snap.index,
        recovery: scan_prepared(cur, &snap.prepared, &shifts, ScanArc::FULL),
    }
}

/// Store slot of the geometrically closest snapshot; ties to the lower slot.
pub fn nearest_snapshot(store: &SnapshotStore, pose: &Pose) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, s) in store.snapshots.iter().enumerate() {
        let d = s.pose.distance(pose);
        if d < best.1 {
            best = (i, d);
        }
    }
    best.0
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellResult {
    pub pose: Pose,
    /// Route index of the snapshot chosen by matching.
    pub matched_index: usize,
    /// Route index of the geometrically nearest snapshot.
    pub reference_index: usize,
    pub reference_heading: f64,
    pub recovered_heading: f64,
    pub error: f64,
    /// Minimum RMS for Perfect Memory; 1 − confidence for the classifier.
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RouteErrorStats {
    pub per_cell: Vec<CellResult>,
    pub mean_error: f64,
    pub median_error: f64,
    pub n: usize,
}

impl RouteErrorStats {
    pub fn from_cells(per_cell: Vec<CellResult>) -> Result<Self> {
        if per_cell.is_empty() {
            return Err(Error::Empty("no evaluated cells".into()));
        }
        let errors: Vec<f64> = per_cell.iter().map(|c| c.error).collect();
        Ok(Self {
            mean_error: mean(&errors),
            median_error: lower_median(&errors),
            n: per_cell.len(),
            per_cell,
        })
    }

    pub fn errors(&self) -> Vec<f64> {
        self.per_cell.iter().map(|c| c.error).collect()
    }

    pub fn summary(&self) -> BoxSummary {
        BoxSummary::new(&self.errors()).expect("stats are never empty")
    }
}

/// Grid cells within `radius` of the store's route.
pub fn cells_in_range<'g>(
    store: &SnapshotStore,
    grid: &'g WorldGrid,
    radius: f64,
) -> Result<Vec<&'g GridCell>> {
    if !(radius > 0.0) {
        return Err(Error::invalid("evaluation radius must be positive"));
    }
    let cells = grid.within(store.route_path(), radius);
    if cells.is_empty() {
        return Err(Error::Empty(format!(
            "no grid cell within {radius} mm of the route"
        )));
    }
    Ok(cells)
}

pub fn evaluate(store: &SnapshotStore, grid: &WorldGrid, radius: f64) -> Result<RouteErrorStats> {
    let cells = cells_in_range(store, grid, radius)?;
    evaluate_cells(store, &cells)
}

/// Recovers a heading at every cell and scores it against the nearest
/// snapshot's heading.
pub fn evaluate_cells(store: &SnapshotStore, cells: &[&GridCell]) -> Result<RouteErrorStats> {
    let prepared = cells
        .par_iter()
        .map(|c| Ok((c.pose, preprocess(&c.view, store.cfg())?)))
        .collect::<Result<Vec<_>>>()?;
    evaluate_prepared(store, &prepared)
}

fn evaluate_prepared(store: &SnapshotStore, cells: &[(Pose, Panorama)]) -> Result<RouteErrorStats> {
    let per_cell = cells
        .par_iter()
        .map(|(pose, view)| {
            if view.dims() != store.view_dims() {
                return Err(Error::DimensionMismatch {
                    expected: store.view_dims(),
                    got: view.dims(),
                });
            }
            let m = recover_prepared(store, &ColumnMajor::new(view));
            let reference = &store.snapshots[nearest_snapshot(store, pose)];
            let recovered = normalize_heading(pose.heading() + m.recovery.recovered_heading);
            Ok(CellResult {
                pose: *pose,
                matched_index: m.route_index,
                reference_index: reference.index,
                reference_heading: reference.pose.heading(),
                recovered_heading: recovered,
                error: heading_error(reference.pose.heading(), recovered),
                weight: m.recovery.min_rms,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    RouteErrorStats::from_cells(per_cell)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyRow {
    pub frequency: usize,
    pub stats: RouteErrorStats,
    pub summary: BoxSummary,
}

/// Evaluates one store per frequency against the same preprocessed cells.
pub fn frequency_sweep(
    route: &Route,
    grid: &WorldGrid,
    cfg: PreprocessConfig,
    frequencies: &[usize],
    radius: f64,
) -> Result<Vec<FrequencyRow>> {
    if frequencies.is_empty() {
        return Err(Error::Empty("frequency list is empty".into()));
    }
    let probe = build_store(route, frequencies[0], cfg)?;
    let cells = cells_in_range(&probe, grid, radius)?;
    let prepared = cells
        .par_iter()
        .map(|c| Ok((c.pose, preprocess(&c.view, &cfg)?)))
        .collect::<Result<Vec<_>>>()?;
    frequencies
        .iter()
        .map(|&n| {
            let store = build_store(route, n, cfg)?;
            let stats = evaluate_prepared(&store, &prepared)?;
            Ok(FrequencyRow {
                frequency: n,
                summary: stats.summary(),
                stats,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PreprocessRow {
    pub factor: usize,
    pub sigma: f64,
    pub mean_error: f64,
    pub median_error: f64,
    pub n: usize,
}

/// Full factor × sigma cross product, factor-major.
pub fn preprocess_sweep(
    route: &Route,
    grid: &WorldGrid,
    factors: &[usize],
    sigmas: &[f64],
    frequency: usize,
    radius: f64,
) -> Result<Vec<PreprocessRow>> {
    if factors.is_empty() || sigmas.is_empty() {
        return Err(Error::Empty(
            "factor and sigma lists must be nonempty".into(),
        ));
    }
    let mut rows = Vec::with_capacity(factors.len() * sigmas.len());
    for &factor in factors {
        for &sigma in sigmas {
            let cfg = PreprocessConfig::new(sigma, factor);
            let store = build_store(route, frequency, cfg)?;
            let stats = evaluate(&store, grid, radius)?;
            rows.push(PreprocessRow {
                factor,
                sigma,
                mean_error: stats.mean_error,
                median_error: stats.median_error,
                n: stats.n,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compass::idf;
    use crate::world::{make_grid, make_route, WorldSpec};
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn spec() -> WorldSpec {
        WorldSpec {
            panorama_width: 72,
            panorama_height: 12,
            ..WorldSpec::default()
        }
    }

    fn fixture() -> &'static (Route, WorldGrid) {
        static F: OnceLock<(Route, WorldGrid)> = OnceLock::new();
        F.get_or_init(|| {
            let s = spec();
            let route = make_route(
                &s,
                &[(3000.0, 3000.0), (3600.0, 3350.0), (3900.0, 4000.0)],
                50.0,
            )
            .unwrap();
            let grid = make_grid(&s, &route, 150.0, 100.0).unwrap();
            (route, grid)
        })
    }

    /// Exhaustive (snapshot × rotation) search computed with `idf` directly.
    fn oracle(store: &SnapshotStore, current: &Panorama) -> (usize, usize, f64) {
        let mut best = (0, 0, f64::INFINITY);
        for (slot, s) in store.snapshots().iter().enumerate() {
            for k in 0..current.width() {
                let v = idf(&current.rotate(k as i64), &s.view).unwrap();
                if v < best.2 {
                    best = (slot, k, v);
                }
            }
        }
        best
    }

    #[test]
    fn store_retention_counts() {
        let (route, _) = fixture();
        let n = route.len();
        assert_eq!(
            build_store(route, 1, PreprocessConfig::identity())
                .unwrap()
                .len(),
            n
        );
        assert_eq!(
            build_store(route, 6, PreprocessConfig::identity())
                .unwrap()
                .len(),
            n.div_ceil(6)
        );
        let one = build_store(route, n + 5, PreprocessConfig::identity()).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.snapshots()[0].index, 0);
        assert!(build_store(route, 0, PreprocessConfig::identity()).is_err());
    }

    #[test]
    fn self_and_rotated_members_are_found() {
        let (route, _) = fixture();
        let store = build_store(route, 3, PreprocessConfig::new(1.0, 2)).unwrap();
        let j = 4;
        let member = store.snapshots()[j].view.clone();
        let m = recover(&store, &member).unwrap();
        assert_eq!(
            (m.slot, m.recovery.recovered_heading, m.recovery.min_rms),
            (j, 0.0, 0.0)
        );
        let w = member.width();
        for k in [1usize, 7, w - 1] {
            let m = recover(&store, &member.rotate(-(k as i64))).unwrap();
            assert_eq!(m.slot, j);
            assert_eq!(m.recovery.shift, k);
            assert_eq!(m.recovery.min_rms, 0.0);
        }
        assert!(recover(&store, &route.snapshots[0]).is_err());
    }

    #[test]
    fn nearest_snapshot_rules() {
        let (route, _) = fixture();
        let store = build_store(route, 2, PreprocessConfig::new(0.0, 4)).unwrap();
        let s3 = store.snapshots()[3].pose;
        assert_eq!(nearest_snapshot(&store, &s3), 3);
        let (a, b) = (store.snapshots()[2].pose, store.snapshots()[3].pose);
        let mid = Pose::new((a.x + b.x) / 2.0, (a.y + b.y) / 2.0, 0.0);
        let da = mid.distance(&a);
        let db = mid.distance(&b);
        if da == db {
            assert_eq!(nearest_snapshot(&store, &mid), 2);
        }
        for c in &fixture().1.cells {
            let brute = (0..store.len())
                .min_by(|&i, &j| {
                    let di = store.snapshots()[i].pose.distance(&c.pose);
                    let dj = store.snapshots()[j].pose.distance(&c.pose);
                    di.total_cmp(&dj).then(i.cmp(&j))
                })
                .unwrap();
            assert_eq!(nearest_snapshot(&store, &c.pose), brute);
        }
    }

    #[test]
    fn equidistant_tie_goes_to_lower_slot() {
        let s = spec();
        let route = make_route(&s, &[(1000.0, 1000.0), (1400.0, 1000.0)], 100.0).unwrap();
        let store = build_store(&route, 1, PreprocessConfig::new(0.0, 4)).unwrap();
        assert_eq!(nearest_snapshot(&store, &Pose::new(1250.0, 1300.0, 0.0)), 2);
    }

    #[test]
    fn recover_matches_double_loop_oracle_on_grid() {
        let (route, grid) = fixture();
        let store = build_store(route, 4, PreprocessConfig::new(1.0, 3)).unwrap();
        for cell in grid.cells.iter().step_by(5) {
            let q = preprocess(&cell.view, store.cfg()).unwrap();
            let m = recover(&store, &q).unwrap();
            let (slot, k, v) = oracle(&store, &q);
            assert_eq!((m.slot, m.recovery.shift, m.recovery.min_rms), (slot, k, v));
        }
    }

    #[test]
    fn snapshot_pose_grid_self_match() {
        let (route, _) = fixture();
        let store = build_store(route, 5, PreprocessConfig::new(0.0, 2)).unwrap();
        let s = spec();
        let world = crate::world::World::new(&s).unwrap();
        let cells: Vec<GridCell> = store
            .snapshots()
            .iter()
            .map(|snap| {
                let pose = snap.pose.with_heading(0.0);
                GridCell {
                    pose,
                    view: world.render(&pose).unwrap(),
                }
            })
            .collect();
        let refs: Vec<&GridCell> = cells.iter().collect();
        let stats = evaluate_cells(&store, &refs).unwrap();
        assert!(stats.median_error < 360.0 / 36.0);
    }

    #[test]
    fn evaluate_is_deterministic_and_aggregates_consistently() {
        let (route, grid) = fixture();
        let store = build_store(route, 3, PreprocessConfig::new(1.0, 4)).unwrap();
        let a = evaluate(&store, grid, 150.0).unwrap();
        let b = evaluate(&store, grid, 150.0).unwrap();
        assert_eq!(a, b);
        let errs = a.errors();
        let m = errs.iter().sum::<f64>() / errs.len() as f64;
        let mut sorted = errs.clone();
        sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!((a.mean_error - m).abs() < 1e-12);
        assert_eq!(a.median_error, sorted[(sorted.len() - 1) / 2]);
        assert_eq!(a.n, a.per_cell.len());
        assert!(evaluate(&store, grid, 0.0).is_err());
    }

    #[test]
    fn sweeps_compose() {
        let (route, grid) = fixture();
        let cfg = PreprocessConfig::new(1.0, 4);
        let rows = frequency_sweep(route, grid, cfg, &[6], 150.0).unwrap();
        assert_eq!(rows.len(), 1);
        let direct = evaluate(&build_store(route, 6, cfg).unwrap(), grid, 150.0).unwrap();
        assert_eq!(rows[0].stats, direct);
        let table = preprocess_sweep(route, grid, &[2, 4, 6], &[0.0, 1.0], 3, 150.0).unwrap();
        assert_eq!(table.len(), 6);
        assert_eq!((table[1].factor, table[1].sigma), (2, 1.0));
        let base = evaluate(
            &build_store(route, 3, PreprocessConfig::new(0.0, 2)).unwrap(),
            grid,
            150.0,
        )
        .unwrap();
        assert_eq!(table[0].median_error, base.median_error);
        // width 72 / 24 = 3 < minimum width
        assert!(preprocess_sweep(route, grid, &[24], &[0.0], 3, 150.0).is_err());
        assert!(frequency_sweep(route, grid, cfg, &[], 150.0).is_err());
    }

    #[test]
    fn containment_holds_per_query() {
        let (route, grid) = fixture();
        let cfg = PreprocessConfig::new(1.0, 3);
        let stores: Vec<_> = [1, 2, 4]
            .iter()
            .map(|&n| build_store(route, n, cfg).unwrap())
            .collect();
        for cell in grid.cells.iter().step_by(3) {
            let q = preprocess(&cell.view, &cfg).unwrap();
            let rms: Vec<f64> = stores
                .iter()
                .map(|s| recover(s, &q).unwrap().recovery.min_rms)
                .collect();
            assert!(rms[0] <= rms[1] && rms[1] <= rms[2], "{rms:?}");
        }
    }

    #[test]
    fn median_resists_one_outlier_while_mean_moves() {
        let (route, grid) = fixture();
        let store = build_store(route, 3, PreprocessConfig::new(1.0, 4)).unwrap();
        let stats = evaluate(&store, grid, 150.0).unwrap();
        let mut cells = stats.per_cell.clone();
        let mut outlier = cells[0];
        outlier.error = 180.0;
        cells.push(outlier);
        let moved = RouteErrorStats::from_cells(cells).unwrap();
        let mut sorted = stats.errors();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mid = (sorted.len() - 1) / 2;
        let gap = sorted.get(mid + 1).map_or(0.0, |v| v - sorted[mid]);
        assert!((moved.median_error - stats.median_error).abs() <= gap);
        let n = (stats.n + 1) as f64;
        assert!(moved.mean_error - stats.mean_error >= (180.0 - stats.mean_error) / n - 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn recover_matches_oracle_on_random_views(
            seed in 0u64..10_000,
            n in 1usize..5,
        ) {
            let (route, _) = fixture();
            let store = build_store(route, n, PreprocessConfig::new(0.0, 4)).unwrap();
            let (w, h) = store.view_dims();
            // mix of a stored view and noise keeps queries near, but not on, the store
            let base = &store.snapshots()[(seed as usize) % store.len()].view;
            let q = Panorama::from_fn(w, h, |r, c| {
                let x = seed.wrapping_mul(2_862_933_555_777_941_757)
                    .wrapping_add((r * w + c) as u64 * 3_037_000_493);
                let noise = ((x >> 33) % 1000) as f64 / 1000.0;
                0.8 * base.get(r, c) + 0.2 * noise
            }).unwrap();
            let m = recover(&store, &q).unwrap();
            let (slot, k, v) = oracle(&store, &q);
            prop_assert_eq!((m.slot, m.recovery.shift, m.recovery.min_rms), (slot, k, v));
        }
    }
}
