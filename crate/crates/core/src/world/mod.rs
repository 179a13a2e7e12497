//! Synthetic panoramic world: poses, routes along polylines, evaluation
//! grids around a route, and the on-disk database layout.

mod db;
mod geometry;
mod render;

pub use db::{load_db, load_world_spec, save_db};
pub use geometry::{distance_to_path, point_segment_distance, rounded_polyline};
pub use render::{render, World, ELEVATION_BOTTOM_DEG, ELEVATION_TOP_DEG};

use rayon::prelude::*;

use crate::imgcore::{Panorama, MIN_WIDTH};
use crate::{Error, Result};

/// Wraps any angle into `[0, 360)`.
pub fn normalize_heading(deg: f64) -> f64 {
    let h = deg.rem_euclid(360.0);
    if h >= 360.0 {
        0.0
    } else {
        h
    }
}

/// Planar position in mm and a heading in degrees, counterclockwise from +x.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading: normalize_heading(heading),
        }
    }

    pub fn heading(&self) -> f64 {
        self.heading
    }

    pub fn with_heading(&self, heading: f64) -> Self {
        Self::new(self.x, self.y, heading)
    }

    pub fn distance(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Parameters of a procedurally generated world.
#[derive(Clone, Debug, PartialEq)]
pub struct WorldSpec {
    pub seed: u64,
    /// Side of the square world in mm; positions range over `[0, extent]`.
    pub extent: f64,
    pub objects: usize,
    pub object_height_range: (f64, f64),
    pub object_radius_range: (f64, f64),
    pub panorama_width: usize,
    pub panorama_height: usize,
    pub eye_height: f64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self {
            seed: 42,
            extent: 10_000.0,
            objects: 40,
            object_height_range: (300.0, 1800.0),
            object_radius_range: (100.0, 450.0),
            panorama_width: 360,
            panorama_height: 60,
            eye_height: 20.0,
        }
    }
}

impl WorldSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let range_ok = |(lo, hi): (f64, f64)| lo > 0.0 && hi >= lo && hi.is_finite();
        if !(self.extent > 0.0 && self.extent.is_finite()) {
            return Err(Error::invalid("world extent must be positive"));
        }
        if !range_ok(self.object_height_range) {
            return Err(Error::invalid(
                "object height range must be positive and ordered",
            ));
        }
        if !range_ok(self.object_radius_range) {
            return Err(Error::invalid(
                "object radius range must be positive and ordered",
            ));
        }
        if self.panorama_width < MIN_WIDTH || self.panorama_height == 0 {
            return Err(Error::invalid(format!(
                "panorama must be at least {MIN_WIDTH}x1, got {}x{}",
                self.panorama_width, self.panorama_height
            )));
        }
        if !(self.eye_height > 0.0) {
            return Err(Error::invalid("eye height must be positive"));
        }
        Ok(())
    }

    /// Flat `key=value` serialization, one key per line.
    pub fn to_kv_text(&self) -> String {
        format!(
            "seed={}\nextent_mm={}\nobjects={}\nobject_height_min_mm={}\nobject_height_max_mm={}\n\
             object_radius_min_mm={}\nobject_radius_max_mm={}\npanorama_width={}\n\
             panorama_height={}\neye_height_mm={}\n",
            self.seed,
            self.extent,
            self.objects,
            self.object_height_range.0,
            self.object_height_range.1,
            self.object_radius_range.0,
            self.object_radius_range.1,
            self.panorama_width,
            self.panorama_height,
            self.eye_height
        )
    }

    /// Parses the output of [`WorldSpec::to_kv_text`]; unknown keys are ignored.
    pub fn from_kv_text(text: &str) -> std::result::Result<Self, String> {
        fn parse<T: std::str::FromStr>(
            v: &str,
            key: &str,
            line: usize,
        ) -> std::result::Result<T, String> {
            v.parse()
                .map_err(|_| format!("line {line}: bad value {v:?} for {key}"))
        }
        const KEYS: [&str; 10] = [
            "seed",
            "extent_mm",
            "objects",
            "object_height_min_mm",
            "object_height_max_mm",
            "object_radius_min_mm",
            "object_radius_max_mm",
            "panorama_width",
            "panorama_height",
            "eye_height_mm",
        ];
        let mut spec = WorldSpec::default();
        let mut seen = [false; KEYS.len()];
        for (idx, line) in text.lines().enumerate() {
            let n = idx + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, v) = line
                .split_once('=')
                .ok_or_else(|| format!("line {n}: expected key=value"))?;
            let (key, v) = (key.trim(), v.trim());
            match key {
                "seed" => spec.seed = parse(v, key, n)?,
                "extent_mm" => spec.extent = parse(v, key, n)?,
                "objects" => spec.objects = parse(v, key, n)?,
                "object_height_min_mm" => spec.object_height_range.0 = parse(v, key, n)?,
                "object_height_max_mm" => spec.object_height_range.1 = parse(v, key, n)?,
                "object_radius_min_mm" => spec.object_radius_range.0 = parse(v, key, n)?,
                "object_radius_max_mm" => spec.object_radius_range.1 = parse(v, key, n)?,
                "panorama_width" => spec.panorama_width = parse(v, key, n)?,
                "panorama_height" => spec.panorama_height = parse(v, key, n)?,
                "eye_height_mm" => spec.eye_height = parse(v, key, n)?,
                _ => continue,
            }
            if let Some(i) = KEYS.iter().position(|k| *k == key) {
                seen[i] = true;
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(format!("world spec is missing key {}", KEYS[i]));
        }
        spec.validate().map_err(|e| e.to_string())?;
        Ok(spec)
    }
}

/// Snapshots captured along a route, in travel order.
#[derive(Clone, Debug, PartialEq)]
pub struct Route {
    /// Heading of each waypoint is the direction toward the next one; the
    /// last waypoint keeps its predecessor's heading.
    pub waypoints: Vec<Pose>,
    pub snapshots: Vec<Panorama>,
    pub spacing: f64,
}

impl Route {
    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn positions(&self) -> Vec<(f64, f64)> {
        self.waypoints.iter().map(|p| (p.x, p.y)).collect()
    }

    /// Angle of the vector from the first to the last waypoint.
    pub fn general_direction(&self) -> f64 {
        let (a, b) = (self.waypoints[0], self.waypoints[self.len() - 1]);
        normalize_heading((b.y - a.y).atan2(b.x - a.x).to_degrees())
    }

    /// Turn angle at each waypoint: circular difference between the
    /// incoming and outgoing headings (0 at the first waypoint).
    pub fn turn_angles(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (o, w) in out.iter_mut().skip(1).zip(self.waypoints.windows(2)) {
            *o = crate::compass::heading_error(w[0].heading(), w[1].heading());
        }
        out
    }

    /// Restricts the route to waypoints `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Route> {
        if range.end > self.len() || range.len() < 2 {
            return Err(Error::invalid(format!(
                "route slice {range:?} invalid for {} waypoints",
                self.len()
            )));
        }
        Ok(Route {
            waypoints: self.waypoints[range.clone()].to_vec(),
            snapshots: self.snapshots[range].to_vec(),
            spacing: self.spacing,
        })
    }
}

/// One evaluation position rendered facing heading 0.
#[derive(Clone, Debug, PartialEq)]
pub struct GridCell {
    pub pose: Pose,
    pub view: Panorama,
}

/// Views on a regular lattice around a route.
#[derive(Clone, Debug, PartialEq)]
pub struct WorldGrid {
    pub cells: Vec<GridCell>,
    pub pitch: f64,
}

impl WorldGrid {
    /// Cells whose distance to the polyline through `path` is at most `radius`.
    pub fn within(&self, path: &[(f64, f64)], radius: f64) -> Vec<&GridCell> {
        self.cells
            .iter()
            .filter(|c| distance_to_path(path, c.pose.x, c.pose.y) <= radius)
            .collect()
    }
}

/// Places waypoints every `spacing` mm (straight-line distance) along the
/// polyline and renders a snapshot at each, facing the direction of travel.
pub fn make_route(spec: &WorldSpec, polyline: &[(f64, f64)], spacing: f64) -> Result<Route> {
    let world = World::new(spec)?;
    make_route_in(&world, polyline, spacing)
}

pub fn make_route_in(world: &World, polyline: &[(f64, f64)], spacing: f64) -> Result<Route> {
    let points = geometry::place_waypoints(polyline, spacing)?;
    let mut waypoints = Vec::with_capacity(points.len());
    for i in 0..points.len() {
        let (a, b) = if i + 1 < points.len() {
            (points[i], points[i + 1])
        } else {
            (points[i - 1], points[i])
        };
        let heading = (b.1 - a.1).atan2(b.0 - a.0).to_degrees();
        waypoints.push(Pose::new(points[i].0, points[i].1, heading));
    }
    let snapshots = waypoints
        .par_iter()
        .map(|p| world.render(p))
        .collect::<Result<Vec<_>>>()?;
    Ok(Route {
        waypoints,
        snapshots,
        spacing,
    })
}

/// Renders, at heading 0, every lattice point within `radius` of the route.
pub fn make_grid(spec: &WorldSpec, route: &Route, radius: f64, pitch: f64) -> Result<WorldGrid> {
    let world = World::new(spec)?;
    make_grid_in(&world, route, radius, pitch)
}

pub fn make_grid_in(world: &World, route: &Route, radius: f64, pitch: f64) -> Result<WorldGrid> {
    if !(radius > 0.0) || !(pitch > 0.0) {
        return Err(Error::invalid("grid radius and pitch must be positive"));
    }
    let path = route.positions();
    let extent = world.spec().extent;
    let (mut lo_x, mut lo_y, mut hi_x, mut hi_y) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for &(x, y) in &path {
        lo_x = lo_x.min(x);
        lo_y = lo_y.min(y);
        hi_x = hi_x.max(x);
        hi_y = hi_y.max(y);
    }
    let first = |lo: f64| ((lo - radius) / pitch).ceil().max(0.0) as i64;
    let last = |hi: f64| ((hi + radius).min(extent) / pitch).floor() as i64;
    let mut poses = Vec::new();
    for j in first(lo_y)..=last(hi_y) {
        for i in first(lo_x)..=last(hi_x) {
            let (x, y) = (i as f64 * pitch, j as f64 * pitch);
            if x <= extent && y <= extent && distance_to_path(&path, x, y) <= radius {
                poses.push(Pose::new(x, y, 0.0));
            }
        }
    }
    if poses.is_empty() {
        return Err(Error::Empty(format!(
            "no lattice point of pitch {pitch} mm lies within {radius} mm of the route"
        )));
    }
    let cells = poses
        .into_par_iter()
        .map(|pose| world.render(&pose).map(|view| GridCell { pose, view }))
        .collect::<Result<Vec<_>>>()?;
    Ok(WorldGrid { cells, pitch })
}

/// Corners of the default evaluation route: four straight legs alternating
/// between roughly 10° and 70° of travel direction.
pub fn default_route_polyline() -> Vec<(f64, f64)> {
    rounded_polyline(
        &[
            (1_500.0, 2_000.0),
            (4_000.0, 2_440.0),
            (4_900.0, 4_910.0),
            (7_400.0, 5_350.0),
            (8_300.0, 7_820.0),
        ],
        150.0,
    )
}

/// An L-shaped route with a single rounded 90° bend.
pub fn default_l_polyline() -> Vec<(f64, f64)> {
    rounded_polyline(
        &[(3_030.0, 6_070.0), (5_530.0, 6_070.0), (5_530.0, 8_570.0)],
        150.0,
    )
}

pub const DEFAULT_SPACING: f64 = 50.0;
pub const DEFAULT_PITCH: f64 = 100.0;
pub const DEFAULT_RADIUS: f64 = 200.0;
