//! Minimal deterministic SVG 1.1 figures: heading maps, line and scatter
//! charts, whisker boxes and bars. Coordinates are printed with fixed
//! precision so identical input gives identical bytes.

use std::fmt::Write as _;

pub const REFERENCE_COLOR: &str = "#d62728";
pub const RECOVERED_COLOR: &str = "#1f77b4";
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

const W: f64 = 720.0;
const H: f64 = 480.0;
const MARGIN: f64 = 60.0;

fn header(out: &mut String, w: f64, h: f64) {
    let _ = writeln!(
        out,
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" \
         version=\"1.1\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>"
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// One arrow pair of a heading diagram.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeadingArrow {
    pub x: f64,
    pub y: f64,
    pub reference_deg: f64,
    pub recovered_deg: f64,
    /// Minimum RMS or `1 - confidence`; smaller draws a longer arrow.
    pub weight: f64,
}

const WEIGHT_EPS: f64 = 1e-6;

/// Recovered-arrow length as a fraction of the pitch: inversely
/// proportional to `eps + weight`, scaled so the smallest weight draws a
/// full-length arrow, and clamped to `[0.2, 1]`.
pub fn arrow_scale(weight: f64, min_weight: f64) -> f64 {
    ((WEIGHT_EPS + min_weight) / (WEIGHT_EPS + weight)).clamp(0.2, 1.0)
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    w: f64,
    h: f64,
}

impl Frame {
    fn new((x0, x1): (f64, f64), (y0, y1): (f64, f64), w: f64, h: f64) -> Self {
        let pad = |a: f64, b: f64| if b > a { (a, b) } else { (a - 1.0, a + 1.0) };
        let (x0, x1) = pad(x0, x1);
        let (y0, y1) = pad(y0, y1);
        Self {
            x0,
            x1,
            y0,
            y1,
            w,
            h,
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (self.w - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        self.h - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (self.h - 2.0 * MARGIN)
    }

    fn axes(&self, out: &mut String, title: &str, x_label: &str, y_label: &str) {
        let (l, r, t, b) = (MARGIN, self.w - MARGIN, MARGIN, self.h - MARGIN);
        let _ = writeln!(
            out,
            "<path d=\"M{l:.2} {t:.2} L{l:.2} {b:.2} L{r:.2} {b:.2}\" stroke=\"black\" fill=\"none\"/>"
        );
        for i in 0..=4 {
            let fx = self.x0 + (self.x1 - self.x0) * i as f64 / 4.0;
            let fy = self.y0 + (self.y1 - self.y0) * i as f64 / 4.0;
            let _ = writeln!(
                out,
                "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\">{}</text>",
                self.px(fx),
                b + 16.0,
                tick(fx)
            );
            let _ = writeln!(
                out,
                "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\">{}</text>",
                l - 6.0,
                self.py(fy) + 4.0,
                tick(fy)
            );
        }
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"24\" font-size=\"15\" text-anchor=\"middle\">{}</text>",
            self.w / 2.0,
            escape(title)
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
            self.w / 2.0,
            self.h - 16.0,
            escape(x_label)
        );
        let _ = writeln!(
            out,
            "<text x=\"16\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\" \
             transform=\"rotate(-90 16 {:.2})\">{}</text>",
            self.h / 2.0,
            self.h / 2.0,
            escape(y_label)
        );
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.trunc() {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

fn legend(out: &mut String, names: &[&str], w: f64) {
    for (i, name) in names.iter().enumerate() {
        let y = MARGIN + 16.0 * i as f64;
        let _ = writeln!(
            out,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"10\" height=\"10\" fill=\"{}\"/>\
             <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\">{}</text>",
            w - MARGIN - 120.0,
            y - 9.0,
            PALETTE[i % PALETTE.len()],
            w - MARGIN - 105.0,
            y,
            escape(name)
        );
    }
}

/// Reference (one colour) and recovered (another) headings at each cell,
/// over the route polyline.
pub fn heading_map(
    title: &str,
    route: &[(f64, f64)],
    arrows: &[HeadingArrow],
    pitch: f64,
) -> Option<String> {
    if arrows.is_empty() {
        return None;
    }
    let xs = bounds(arrows.iter().map(|a| a.x).chain(route.iter().map(|p| p.0)));
    let ys = bounds(arrows.iter().map(|a| a.y).chain(route.iter().map(|p| p.1)));
    let span = (xs.1 - xs.0).max(ys.1 - ys.0) + 2.0 * pitch;
    let (cx, cy) = ((xs.0 + xs.1) / 2.0, (ys.0 + ys.1) / 2.0);
    let size = 720.0;
    let f = Frame::new(
        (cx - span / 2.0, cx + span / 2.0),
        (cy - span / 2.0, cy + span / 2.0),
        size,
        size,
    );
    let mut out = String::new();
    header(&mut out, size, size);
    f.axes(&mut out, title, "x (mm)", "y (mm)");
    if !route.is_empty() {
        let mut d = String::new();
        for (i, p) in route.iter().enumerate() {
            let _ = write!(
                d,
                "{}{:.2} {:.2} ",
                if i == 0 { 'M' } else { 'L' },
                f.px(p.0),
                f.py(p.1)
            );
        }
        let _ = writeln!(
            out,
            "<path d=\"{}\" stroke=\"#888888\" fill=\"none\"/>",
            d.trim_end()
        );
    }
    let min_w = arrows
        .iter()
        .map(|a| a.weight)
        .fold(f64::INFINITY, f64::min);
    let unit = pitch * 0.45;
    for a in arrows {
        let draw = |out: &mut String, deg: f64, len: f64, color: &str| {
            let r = deg.to_radians();
            let (x1, y1) = (a.x + len * r.cos(), a.y + len * r.sin());
            let _ = writeln!(
                out,
                "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
                f.px(a.x),
                f.py(a.y),
                f.px(x1),
                f.py(y1)
            );
        };
        draw(&mut out, a.reference_deg, unit, REFERENCE_COLOR);
        draw(
            &mut out,
            a.recovered_deg,
            unit * arrow_scale(a.weight, min_w),
            RECOVERED_COLOR,
        );
    }
    legend(&mut out, &["recovered", "reference"], size);
    out.push_str("</svg>\n");
    Some(out)
}

/// Polylines or point clouds sharing one pair of axes.
pub struct Chart<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub series: Vec<(&'a str, Vec<(f64, f64)>)>,
    pub points_only: bool,
}

impl Chart<'_> {
    pub fn render(&self) -> String {
        let all = || self.series.iter().flat_map(|s| s.1.iter());
        let f = Frame::new(bounds(all().map(|p| p.0)), bounds(all().map(|p| p.1)), W, H);
        let mut out = String::new();
        header(&mut out, W, H);
        f.axes(&mut out, self.title, self.x_label, self.y_label);
        for (i, (_, pts)) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            if self.points_only {
                for p in pts {
                    let _ = writeln!(
                        out,
                        "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{color}\"/>",
                        f.px(p.0),
                        f.py(p.1)
                    );
                }
            } else if !pts.is_empty() {
                let mut d = String::new();
                for (j, p) in pts.iter().enumerate() {
                    let _ = write!(
                        d,
                        "{}{:.2} {:.2} ",
                        if j == 0 { 'M' } else { 'L' },
                        f.px(p.0),
                        f.py(p.1)
                    );
                }
                let _ = writeln!(
                    out,
                    "<path d=\"{}\" stroke=\"{color}\" fill=\"none\" stroke-width=\"1.5\"/>",
                    d.trim_end()
                );
            }
        }
        let names: Vec<&str> = self.series.iter().map(|s| s.0).collect();
        legend(&mut out, &names, W);
        out.push_str("</svg>\n");
        out
    }
}

/// One box of a whisker plot.
pub struct WhiskerBox {
    pub label: String,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub outliers: Vec<f64>,
}

pub fn whisker_plot(title: &str, x_label: &str, y_label: &str, boxes: &[WhiskerBox]) -> String {
    let n = boxes.len().max(1) as f64;
    let ys = bounds(
        boxes
            .iter()
            .flat_map(|b| [b.min, b.max].into_iter().chain(b.outliers.iter().copied())),
    );
    let f = Frame::new((0.0, n), (ys.0.min(0.0), ys.1), W, H);
    let mut out = String::new();
    header(&mut out, W, H);
    f.axes(&mut out, title, x_label, y_label);
    let half = 0.3;
    for (i, b) in boxes.iter().enumerate() {
        let c = i as f64 + 0.5;
        let (l, r) = (f.px(c - half), f.px(c + half));
        let _ = writeln!(
            out,
            "<rect x=\"{l:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#c6dbef\" stroke=\"black\"/>",
            f.py(b.q3),
            r - l,
            f.py(b.q1) - f.py(b.q3)
        );
        let _ = writeln!(
            out,
            "<line x1=\"{l:.2}\" y1=\"{y:.2}\" x2=\"{r:.2}\" y2=\"{y:.2}\" stroke=\"{REFERENCE_COLOR}\" stroke-width=\"2\"/>",
            y = f.py(b.median)
        );
        let mid = f.px(c);
        for (a, z) in [(b.q3, b.max), (b.q1, b.min)] {
            let _ = writeln!(
                out,
                "<line x1=\"{mid:.2}\" y1=\"{:.2}\" x2=\"{mid:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
                f.py(a),
                f.py(z)
            );
        }
        for o in &b.outliers {
            let _ = writeln!(
                out,
                "<circle cx=\"{mid:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"none\" stroke=\"black\"/>",
                f.py(*o)
            );
        }
        let _ = writeln!(
            out,
            "<text x=\"{mid:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\">{}</text>",
            H - MARGIN + 30.0,
            escape(&b.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

pub fn bar_chart(title: &str, y_label: &str, bars: &[(String, f64)]) -> String {
    let n = bars.len().max(1) as f64;
    let ys = bounds(bars.iter().map(|b| b.1));
    let f = Frame::new((0.0, n), (0.0, ys.1.max(1e-9)), W, H);
    let mut out = String::new();
    header(&mut out, W, H);
    f.axes(&mut out, title, "configuration (rank order)", y_label);
    for (i, (label, v)) in bars.iter().enumerate() {
        let (l, r) = (f.px(i as f64 + 0.15), f.px(i as f64 + 0.85));
        let _ = writeln!(
            out,
            "<rect x=\"{l:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{RECOVERED_COLOR}\"><title>{}</title></rect>",
            f.py(*v),
            r - l,
            f.py(0.0) - f.py(*v),
            escape(label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Top view of the world: occluders, route and grid cells.
pub fn world_map(
    extent: f64,
    objects: &[(f64, f64, f64)],
    route: &[(f64, f64)],
    cells: &[(f64, f64)],
) -> String {
    let size = 720.0;
    let f = Frame::new((0.0, extent), (0.0, extent), size, size);
    let mut out = String::new();
    header(&mut out, size, size);
    f.axes(&mut out, "world", "x (mm)", "y (mm)");
    let scale = (size - 2.0 * MARGIN) / extent;
    for (x, y, r) in objects {
        let _ = writeln!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{:.2}\" fill=\"#6b8e23\" fill-opacity=\"0.6\"/>",
            f.px(*x),
            f.py(*y),
            r * scale
        );
    }
    for (x, y) in cells {
        let _ = writeln!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"0.8\" fill=\"black\"/>",
            f.px(*x),
            f.py(*y)
        );
    }
    let mut d = String::new();
    for (i, p) in route.iter().enumerate() {
        let _ = write!(
            d,
            "{}{:.2} {:.2} ",
            if i == 0 { 'M' } else { 'L' },
            f.px(p.0),
            f.py(p.1)
        );
    }
    let _ = writeln!(
        out,
        "<path d=\"{}\" stroke=\"{REFERENCE_COLOR}\" fill=\"none\" stroke-width=\"2\"/>",
        d.trim_end()
    );
    out.push_str("</svg>\n");
    out
}
