//! Skyline renderer for a field of tussock-like vertical frustums.
//!
//! Every column is supersampled horizontally and vertically and the result
//! is quantized to 8-bit levels, so rendered views survive a PGM round trip
//! unchanged.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Pose, WorldSpec};
use crate::imgcore::Panorama;
use crate::{Error, Result};

/// Elevation of the upper edge of the top row.
pub const ELEVATION_TOP_DEG: f64 = 60.0;
/// Elevation of the lower edge of the bottom row.
pub const ELEVATION_BOTTOM_DEG: f64 = -15.0;

const H_SAMPLES: usize = 4;
const V_SAMPLES: usize = 2;
/// Headings are snapped to micro-degrees so the column decomposition is exact.
const MICRO: i128 = 1_000_000;
const FULL_TURN_MICRO: i128 = 360 * MICRO;

#[derive(Clone, Debug)]
struct Tussock {
    x: f64,
    y: f64,
    height: f64,
    base_radius: f64,
    top_radius: f64,
    shade: f64,
}

/// A generated world, ready to render views from any pose.
#[derive(Clone, Debug)]
pub struct World {
    spec: WorldSpec,
    tussocks: Vec<Tussock>,
}

/// Renders one view; regenerates the world each call, so prefer
/// [`World::render`] in loops.
pub fn render(spec: &WorldSpec, pose: &Pose) -> Result<Panorama> {
    World::new(spec)?.render(pose)
}

struct Visible<'a> {
    dist: f64,
    bearing: f64,
    tussock: &'a Tussock,
}

impl World {
    pub fn new(spec: &WorldSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let (h_lo, h_hi) = spec.object_height_range;
        let (r_lo, r_hi) = spec.object_radius_range;
        let tussocks = (0..spec.objects)
            .map(|_| {
                let x = rng.gen::<f64>() * spec.extent;
                let y = rng.gen::<f64>() * spec.extent;
                let height = h_lo + rng.gen::<f64>() * (h_hi - h_lo);
                let base_radius = r_lo + rng.gen::<f64>() * (r_hi - r_lo);
                let taper = 0.3 + 0.6 * rng.gen::<f64>();
                let shade = 0.04 + 0.28 * rng.gen::<f64>();
                Tussock {
                    x,
                    y,
                    height,
                    base_radius,
                    top_radius: base_radius * taper,
                    shade,
                }
            })
            .collect();
        Ok(Self {
            spec: spec.clone(),
            tussocks,
        })
    }

    pub fn spec(&self) -> &WorldSpec {
        &self.spec
    }

    /// Positions and base radii of the occluders, for plotting.
    pub fn objects(&self) -> Vec<(f64, f64, f64)> {
        self.tussocks
            .iter()
            .map(|t| (t.x, t.y, t.base_radius))
            .collect()
    }

    /// Column 0 looks along the pose heading; azimuth grows with the column
    /// index, counterclockwise.
    pub fn render(&self, pose: &Pose) -> Result<Panorama> {
        let extent = self.spec.extent;
        if !(0.0..=extent).contains(&pose.x) || !(0.0..=extent).contains(&pose.y) {
            return Err(Error::OutsideWorld {
                x: pose.x,
                y: pose.y,
                extent,
            });
        }
        let w = self.spec.panorama_width;
        let h = self.spec.panorama_height;

        // heading = (whole + frac) columns
        let micro = ((pose.heading() * MICRO as f64).round() as i128).rem_euclid(FULL_TURN_MICRO);
        let scaled = micro * w as i128;
        let whole = (scaled / FULL_TURN_MICRO) as i64;
        let frac = (scaled % FULL_TURN_MICRO) as f64 / FULL_TURN_MICRO as f64;

        let mut visible: Vec<Visible> = self
            .tussocks
            .iter()
            .filter_map(|t| {
                let (dx, dy) = (t.x - pose.x, t.y - pose.y);
                let dist = dx.hypot(dy);
                // the eye inside a tussock sees through it
                (dist > t.base_radius).then(|| Visible {
                    dist,
                    bearing: dy.atan2(dx),
                    tussock: t,
                })
            })
            .collect();
        visible.sort_by(|a, b| a.dist.total_cmp(&b.dist));

        let row_deg = (ELEVATION_TOP_DEG - ELEVATION_BOTTOM_DEG) / h as f64;
        let elevations: Vec<f64> = (0..h * V_SAMPLES)
            .map(|i| {
                let e = ELEVATION_TOP_DEG - (i as f64 + 0.5) / V_SAMPLES as f64 * row_deg;
                e.to_radians()
            })
            .collect();
        let background: Vec<f64> = elevations
            .iter()
            .map(|&e| {
                let deg = e.to_degrees();
                if deg >= 0.0 {
                    0.72 + 0.24 * deg / ELEVATION_TOP_DEG
                } else {
                    0.42 + 0.1 * deg / -ELEVATION_BOTTOM_DEG
                }
            })
            .collect();

        let step = std::f64::consts::TAU / w as f64;
        let mut base = vec![0.0; w * h];
        // (lowest elevation, highest elevation, shade) per covering occluder, nearest first
        let mut spans: Vec<(f64, f64, f64)> = Vec::with_capacity(visible.len());
        for col in 0..w {
            for s in 0..H_SAMPLES {
                let az = (col as f64 + frac + (s as f64 + 0.5) / H_SAMPLES as f64 - 0.5) * step;
                spans.clear();
                for v in &visible {
                    let t = v.tussock;
                    let mut delta = (az - v.bearing).rem_euclid(std::f64::consts::TAU);
                    if delta > std::f64::consts::PI {
                        delta = std::f64::consts::TAU - delta;
                    }
                    if delta >= std::f64::consts::FRAC_PI_2 {
                        continue;
                    }
                    let offset = v.dist * delta.sin();
                    if offset > t.base_radius {
                        continue;
                    }
                    // radius shrinks linearly with height; find where it equals the offset
                    let top_z = if offset <= t.top_radius {
                        t.height
                    } else {
                        t.height * (t.base_radius - offset) / (t.base_radius - t.top_radius)
                    };
                    let lo = ((-self.spec.eye_height) / v.dist).atan();
                    let hi = ((top_z - self.spec.eye_height) / v.dist).atan();
                    spans.push((lo, hi, t.shade));
                }
                for (i, &e) in elevations.iter().enumerate() {
                    let value = spans
                        .iter()
                        .find(|(lo, hi, _)| e >= *lo && e <= *hi)
                        .map_or(background[i], |s| s.2);
                    base[(i / V_SAMPLES) * w + col] += value;
                }
            }
        }
        let norm = (H_SAMPLES * V_SAMPLES) as f64;
        for v in &mut base {
            *v = ((*v / norm).clamp(0.0, 1.0) * 255.0).round() / 255.0;
        }
        Ok(Panorama::new(w, h, base)?.rotate(whole))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compass::idf;
    use proptest::prelude::*;

    fn spec(objects: usize) -> WorldSpec {
        WorldSpec {
            objects,
            panorama_width: 90,
            panorama_height: 20,
            ..WorldSpec::default()
        }
    }

    #[test]
    fn featureless_world_has_identical_columns() {
        let world = World::new(&spec(0)).unwrap();
        let a = world.render(&Pose::new(1000.0, 2000.0, 0.0)).unwrap();
        let b = world.render(&Pose::new(7000.0, 300.0, 123.0)).unwrap();
        for r in 0..a.height() {
            assert!(a.row(r).iter().all(|v| *v == a.get(r, 0)));
        }
        assert_eq!(idf(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn render_is_deterministic() {
        let s = spec(30);
        let p = Pose::new(4321.0, 5678.0, 33.3);
        assert_eq!(render(&s, &p).unwrap(), render(&s, &p).unwrap());
    }

    #[test]
    fn one_column_heading_step_is_a_rotation() {
        let s = spec(30);
        let world = World::new(&s).unwrap();
        let pose = Pose::new(5000.0, 5000.0, 17.25);
        let a = world.render(&pose).unwrap();
        let b = world
            .render(&pose.with_heading(pose.heading() + 360.0 / s.panorama_width as f64))
            .unwrap();
        assert_eq!(b, a.rotate(1));
    }

    #[test]
    fn outside_extent_is_rejected() {
        let world = World::new(&spec(3)).unwrap();
        assert!(matches!(
            world.render(&Pose::new(-1.0, 10.0, 0.0)),
            Err(Error::OutsideWorld { .. })
        ));
        assert!(world.render(&Pose::new(10_000.0, 0.0, 0.0)).is_ok());
    }

    #[test]
    fn textured_world_is_translation_sensitive() {
        let world = World::new(&spec(1)).unwrap();
        let (x, y, _) = world.objects()[0];
        let near = world
            .render(&Pose::new((x + 800.0).min(9_999.0), y, 0.0))
            .unwrap();
        let far = world
            .render(&Pose::new((x - 3000.0).max(1.0), y, 0.0))
            .unwrap();
        assert!(idf(&near, &far).unwrap() > 0.0);
    }

    #[test]
    fn pixels_are_8bit_levels() {
        let world = World::new(&spec(20)).unwrap();
        let p = world.render(&Pose::new(3000.0, 3000.0, 0.0)).unwrap();
        assert_eq!(
            Panorama::from_u8(p.width(), p.height(), &p.to_u8()).unwrap(),
            p
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn heading_shift_equals_column_rotation(
            x in 0.0f64..10_000.0,
            y in 0.0f64..10_000.0,
            heading in 0.0f64..360.0,
            k in -90i64..180,
        ) {
            let s = spec(25);
            let world = World::new(&s).unwrap();
            // whole micro-degree headings keep the comparison exact
            let heading = (heading * 1e3).round() / 1e3;
            let pose = Pose::new(x, y, heading);
            let step = 360.0 / s.panorama_width as f64;
            let a = world.render(&pose).unwrap();
            let b = world.render(&pose.with_heading(heading + k as f64 * step)).unwrap();
            prop_assert_eq!(b, a.rotate(k));
        }
    }
}
