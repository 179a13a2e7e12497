use crate::{Error, Result};

type Pt = (f64, f64);

pub fn point_segment_distance(p: Pt, a: Pt, b: Pt) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    (p.0 - (a.0 + t * dx)).hypot(p.1 - (a.1 + t * dy))
}

/// Shortest distance from `(x, y)` to the polyline through `path`.
pub fn distance_to_path(path: &[Pt], x: f64, y: f64) -> f64 {
    match path {
        [] => f64::INFINITY,
        [only] => (x - only.0).hypot(y - only.1),
        _ => path
            .windows(2)
            .map(|w| point_segment_distance((x, y), w[0], w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Walks the polyline from its first vertex, emitting each next point as the
/// first position further along whose straight-line distance from the
/// previous point equals `spacing`.
pub(crate) fn place_waypoints(polyline: &[Pt], spacing: f64) -> Result<Vec<Pt>> {
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(Error::invalid("route spacing must be positive"));
    }
    if polyline.len() < 2 {
        return Err(Error::invalid("route polyline needs at least two vertices"));
    }
    let total: f64 = polyline
        .windows(2)
        .map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1))
        .sum();
    if total < spacing {
        return Err(Error::invalid(format!(
            "route polyline length {total:.3} mm is shorter than the spacing {spacing} mm"
        )));
    }

    const T_SLACK: f64 = 1e-9;
    let mut out = vec![polyline[0]];
    let (mut seg, mut t0) = (0usize, 0.0f64);
    'walk: loop {
        let cur = *out.last().unwrap();
        while seg + 1 < polyline.len() {
            let (a, b) = (polyline[seg], polyline[seg + 1]);
            let d = (b.0 - a.0, b.1 - a.1);
            let f = (a.0 - cur.0, a.1 - cur.1);
            // |f + t d|^2 = spacing^2
            let qa = d.0 * d.0 + d.1 * d.1;
            if qa > 0.0 {
                let qb = 2.0 * (f.0 * d.0 + f.1 * d.1);
                let qc = f.0 * f.0 + f.1 * f.1 - spacing * spacing;
                let disc = qb * qb - 4.0 * qa * qc;
                if disc >= 0.0 {
                    let root = disc.sqrt();
                    // larger root is the forward crossing out of the circle
                    let t = (-qb + root) / (2.0 * qa);
                    if t >= t0 - T_SLACK && t <= 1.0 + T_SLACK {
                        let t = t.clamp(t0, 1.0);
                        let p = (a.0 + t * d.0, a.1 + t * d.1);
                        if (p.0 - cur.0).hypot(p.1 - cur.1) > 0.5 * spacing {
                            out.push(p);
                            t0 = t;
                            continue 'walk;
                        }
                    }
                }
            }
            seg += 1;
            t0 = 0.0;
        }
        break;
    }
    if out.len() < 2 {
        return Err(Error::invalid(
            "degenerate route polyline: no second waypoint at the requested spacing",
        ));
    }
    Ok(out)
}

/// Replaces each interior corner by a circular fillet of `radius` mm,
/// sampled as short chords.
pub fn rounded_polyline(corners: &[Pt], radius: f64) -> Vec<Pt> {
    if corners.len() < 3 || radius <= 0.0 {
        return corners.to_vec();
    }
    let mut out = vec![corners[0]];
    for i in 1..corners.len() - 1 {
        let (p0, p1, p2) = (corners[i - 1], corners[i], corners[i + 1]);
        let u = unit((p0.0 - p1.0, p0.1 - p1.1));
        let v = unit((p2.0 - p1.0, p2.1 - p1.1));
        let cos = (u.0 * v.0 + u.1 * v.1).clamp(-1.0, 1.0);
        let inner = cos.acos();
        if inner.abs() < 1e-9 || (std::f64::consts::PI - inner).abs() < 1e-9 {
            out.push(p1);
            continue;
        }
        let tangent = radius / (inner / 2.0).tan();
        let start = (p1.0 + u.0 * tangent, p1.1 + u.1 * tangent);
        let end = (p1.0 + v.0 * tangent, p1.1 + v.1 * tangent);
        let bis = unit((u.0 + v.0, u.1 + v.1));
        let center_dist = radius / (inner / 2.0).sin();
        let c = (p1.0 + bis.0 * center_dist, p1.1 + bis.1 * center_dist);
        let a0 = (start.1 - c.1).atan2(start.0 - c.0);
        let mut a1 = (end.1 - c.1).atan2(end.0 - c.0);
        let turn = std::f64::consts::PI - inner;
        // pick the short way round
        let mut delta = a1 - a0;
        while delta > std::f64::consts::PI {
            delta -= 2.0 * std::f64::consts::PI;
        }
        while delta < -std::f64::consts::PI {
            delta += 2.0 * std::f64::consts::PI;
        }
        a1 = a0 + delta;
        let steps = ((turn.to_degrees() / 5.0).ceil() as usize).max(2);
        for s in 0..=steps {
            let a = a0 + (a1 - a0) * s as f64 / steps as f64;
            out.push((c.0 + radius * a.cos(), c.1 + radius * a.sin()));
        }
    }
    out.push(*corners.last().unwrap());
    out
}

fn unit(v: Pt) -> Pt {
    let n = v.0.hypot(v.1);
    (v.0 / n, v.1 / n)
}
