//! Image database on disk:
//!
//! ```text
//! <dir>/manifest.csv      id,x_mm,y_mm,heading_deg,role
//! <dir>/world.txt         key=value world spec plus grid/route metadata
//! <dir>/images/<id>.pgm   binary 8-bit PGM per view
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use super::{GridCell, Pose, Route, WorldGrid, WorldSpec};
use crate::imgcore::{to_grayscale, Panorama, RgbImage};
use crate::{Error, Result};

const MANIFEST: &str = "manifest.csv";
const WORLD: &str = "world.txt";
const IMAGES: &str = "images";
const HEADER: &str = "id,x_mm,y_mm,heading_deg,role";

pub fn save_db(
    dir: &Path,
    grid: &WorldGrid,
    route: &Route,
    spec: Option<&WorldSpec>,
) -> Result<()> {
    let images = dir.join(IMAGES);
    fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;

    let mut manifest = String::from(HEADER);
    manifest.push('\n');
    let mut write_view = |id: String, pose: &Pose, view: &Panorama, role: &str| -> Result<()> {
        manifest.push_str(&format!(
            "{id},{},{},{},{role}\n",
            pose.x,
            pose.y,
            pose.heading()
        ));
        let path = images.join(format!("{id}.pgm"));
        fs::write(&path, encode_pgm(view)).map_err(|e| Error::io(&path, e))
    };
    for (i, (pose, view)) in route.waypoints.iter().zip(&route.snapshots).enumerate() {
        write_view(format!("route_{i:05}"), pose, view, "route")?;
    }
    for (i, cell) in grid.cells.iter().enumerate() {
        write_view(format!("grid_{i:05}"), &cell.pose, &cell.view, "grid")?;
    }
    let path = dir.join(MANIFEST);
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;

    let mut meta = spec.map(WorldSpec::to_kv_text).unwrap_or_default();
    meta.push_str(&format!(
        "grid_pitch_mm={}\nroute_spacing_mm={}\n",
        grid.pitch, route.spacing
    ));
    let path = dir.join(WORLD);
    fs::write(&path, meta).map_err(|e| Error::io(&path, e))
}

/// World spec stored beside the manifest, if the database carries one.
pub fn load_world_spec(dir: &Path) -> Result<Option<WorldSpec>> {
    let path = dir.join(WORLD);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    if !text.lines().any(|l| l.trim_start().starts_with("seed=")) {
        return Ok(None);
    }
    WorldSpec::from_kv_text(&text)
        .map(Some)
        .map_err(|msg| Error::Malformed {
            what: "world spec",
            path,
            msg,
        })
}

pub fn load_db(dir: &Path) -> Result<(WorldGrid, Route)> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.clone()),
        _ => Error::io(&path, e),
    })?;
    let malformed = |line: usize, msg: String| Error::Malformed {
        what: "manifest",
        path: path.clone(),
        msg: format!("line {line}: {msg}"),
    };

    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == HEADER => {}
        _ => return Err(malformed(1, format!("expected header `{HEADER}`"))),
    }

    let mut dims: Option<(usize, usize)> = None;
    let mut route_views = Vec::new();
    let mut grid_cells = Vec::new();
    for (idx, line) in lines {
        let n = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(malformed(
                n,
                format!("expected 5 fields, found {}", fields.len()),
            ));
        }
        let num = |i: usize, name: &str| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| malformed(n, format!("bad {name} {:?}", fields[i])))
        };
        let pose = Pose::new(num(1, "x_mm")?, num(2, "y_mm")?, num(3, "heading_deg")?);
        let image_path = dir.join(IMAGES).join(format!("{}.pgm", fields[0]));
        let view = read_image(&image_path)?;
        match dims {
            None => dims = Some(view.dims()),
            Some(d) if d != view.dims() => {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: view.dims(),
                })
            }
            _ => {}
        }
        match fields[4] {
            "route" => route_views.push((pose, view)),
            "grid" => grid_cells.push(GridCell { pose, view }),
            other => return Err(malformed(n, format!("unknown role {other:?}"))),
        }
    }

    let meta = read_meta(dir)?;
    let spacing = meta.1.unwrap_or_else(|| {
        route_views
            .windows(2)
            .next()
            .map_or(0.0, |w| w[0].0.distance(&w[1].0))
    });
    let pitch = meta.0.unwrap_or_else(|| infer_pitch(&grid_cells));
    let (waypoints, snapshots) = route_views.into_iter().unzip();
    Ok((
        WorldGrid {
            cells: grid_cells,
            pitch,
        },
        Route {
            waypoints,
            snapshots,
            spacing,
        },
    ))
}

fn read_meta(dir: &Path) -> Result<(Option<f64>, Option<f64>)> {
    let path = dir.join(WORLD);
    if !path.exists() {
        return Ok((None, None));
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let lookup = |key: &str| {
        text.lines()
            .filter_map(|l| l.split_once('='))
            .find(|(k, _)| k.trim() == key)
            .and_then(|(_, v)| v.trim().parse::<f64>().ok())
    };
    Ok((lookup("grid_pitch_mm"), lookup("route_spacing_mm")))
}

fn infer_pitch(cells: &[GridCell]) -> f64 {
    let mut best = f64::INFINITY;
    for a in cells {
        for b in cells {
            let d = (a.pose.x - b.pose.x).abs().max((a.pose.y - b.pose.y).abs());
            if d > 1e-6 && d < best {
                best = d;
            }
        }
    }
    if best.is_finite() {
        best
    } else {
        0.0
    }
}

pub(crate) fn encode_pgm(p: &Panorama) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", p.width(), p.height()).into_bytes();
    out.extend(p.to_u8());
    out
}

fn read_image(path: &Path) -> Result<Panorama> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::io(path, e),
    })?;
    decode_netpbm(&bytes).map_err(|msg| Error::Malformed {
        what: "image",
        path: PathBuf::from(path),
        msg,
    })
}

/// Decodes binary PGM (P5) or PPM (P6, converted to luma) with maxval <= 255.
pub(crate) fn decode_netpbm(bytes: &[u8]) -> std::result::Result<Panorama, String> {
    let mut pos = 0;
    let mut token = || -> std::result::Result<String, String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token()?;
    let channels = match magic.as_str() {
        "P5" => 1,
        "P6" => 3,
        m => return Err(format!("unsupported magic {m:?}")),
    };
    let num = |t: String| {
        t.parse::<usize>()
            .map_err(|_| format!("bad header value {t:?}"))
    };
    let width = num(token()?)?;
    let height = num(token()?)?;
    let maxval = num(token()?)?;
    if maxval == 0 || maxval > 255 {
        return Err(format!("unsupported maxval {maxval}"));
    }
    // exactly one whitespace byte separates the header from the raster
    let data = bytes.get(pos + 1..).ok_or("missing raster")?;
    let n = width * height;
    if data.len() < n * channels {
        return Err(format!(
            "raster has {} bytes, expected {}",
            data.len(),
            n * channels
        ));
    }
    let scale = |b: u8| {
        if maxval == 255 {
            f64::from(b) / 255.0
        } else {
            (f64::from(b) / maxval as f64).min(1.0)
        }
    };
    if channels == 1 {
        Panorama::new(width, height, data[..n].iter().map(|&b| scale(b)).collect())
            .map_err(|e| e.to_string())
    } else {
        let ch = |c: usize| (0..n).map(|i| scale(data[i * 3 + c])).collect();
        to_grayscale(&RgbImage {
            width,
            height,
            r: ch(0),
            g: ch(1),
            b: ch(2),
        })
        .map_err(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{make_grid, make_route};

    fn tiny_db() -> (WorldSpec, WorldGrid, Route) {
        let spec = WorldSpec {
            objects: 10,
            panorama_width: 36,
            panorama_height: 8,
            ..WorldSpec::default()
        };
        let route = make_route(&spec, &[(1010.0, 1020.0), (1410.0, 1320.0)], 100.0).unwrap();
        let mut grid = make_grid(&spec, &route, 100.0, 100.0).unwrap();
        grid.cells.truncate(3);
        (spec, grid, route)
    }

    #[test]
    fn round_trip_is_exact() {
        let (spec, grid, route) = tiny_db();
        let dir = tempfile::tempdir().unwrap();
        save_db(dir.path(), &grid, &route, Some(&spec)).unwrap();
        let (g2, r2) = load_db(dir.path()).unwrap();
        assert_eq!(g2.cells.len(), 3);
        for (a, b) in grid.cells.iter().zip(&g2.cells) {
            assert_eq!(a.view, b.view);
            assert!((a.pose.x - b.pose.x).abs() < 1e-9);
            assert!((a.pose.y - b.pose.y).abs() < 1e-9);
            assert!((a.pose.heading() - b.pose.heading()).abs() < 1e-9);
        }
        assert_eq!(r2.snapshots, route.snapshots);
        for (a, b) in route.waypoints.iter().zip(&r2.waypoints) {
            assert!(a.distance(b) < 1e-9 && (a.heading() - b.heading()).abs() < 1e-9);
        }
        assert_eq!(r2.spacing, route.spacing);
        assert_eq!(g2.pitch, grid.pitch);
        assert_eq!(load_world_spec(dir.path()).unwrap(), Some(spec));
    }

    #[test]
    fn missing_image_names_the_file() {
        let (spec, grid, route) = tiny_db();
        let dir = tempfile::tempdir().unwrap();
        save_db(dir.path(), &grid, &route, Some(&spec)).unwrap();
        std::fs::remove_file(dir.path().join("images/grid_00001.pgm")).unwrap();
        let err = load_db(dir.path()).unwrap_err();
        assert!(err.to_string().contains("grid_00001.pgm"), "{err}");
    }

    #[test]
    fn heading_360_normalizes_to_zero() {
        let (spec, grid, route) = tiny_db();
        let dir = tempfile::tempdir().unwrap();
        save_db(dir.path(), &grid, &route, Some(&spec)).unwrap();
        let path = dir.path().join("manifest.csv");
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let f: Vec<&str> = lines[1].split(',').collect();
        lines[1] = format!("{},{},{},360.0,{}", f[0], f[1], f[2], f[4]);
        std::fs::write(&path, lines.join("\n") + "\n").unwrap();
        let (_, r) = load_db(dir.path()).unwrap();
        assert_eq!(r.waypoints[0].heading(), 0.0);
    }

    #[test]
    fn malformed_manifest_and_dimension_mismatch() {
        let (spec, grid, route) = tiny_db();
        let dir = tempfile::tempdir().unwrap();
        save_db(dir.path(), &grid, &route, Some(&spec)).unwrap();
        let path = dir.path().join("manifest.csv");
        let good = std::fs::read_to_string(&path).unwrap();

        std::fs::write(&path, good.replacen("id,x_mm", "nope,x_mm", 1)).unwrap();
        assert!(matches!(load_db(dir.path()), Err(Error::Malformed { .. })));

        std::fs::write(&path, format!("{good}grid_9,1,2\n")).unwrap();
        let err = load_db(dir.path()).unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");

        std::fs::write(&path, &good).unwrap();
        let odd = Panorama::filled(20, 8, 0.5).unwrap();
        std::fs::write(dir.path().join("images/grid_00002.pgm"), encode_pgm(&odd)).unwrap();
        assert!(matches!(
            load_db(dir.path()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn decodes_ppm_with_comments() {
        let mut bytes = b"P6\n# colour\n4 1\n255\n".to_vec();
        bytes.extend([255, 0, 0].repeat(4));
        let p = decode_netpbm(&bytes).unwrap();
        assert!(p.pixels().iter().all(|v| (v - 0.299).abs() < 1e-12));
        assert!(decode_netpbm(b"P2\n4 1\n255\n").is_err());
    }
}
