//! Panoramic grayscale images: exact rotation by column shift and the
//! grayscale / Gaussian / resize preprocessing chain.

use crate::{Error, Result};

/// Smallest panorama width accepted anywhere in the library.
pub const MIN_WIDTH: usize = 4;

/// A panoramic grayscale view spanning exactly 360° of azimuth.
///
/// Pixels are row-major, intensities in `[0, 1]`. Column `j` looks along
/// azimuth `heading + j * step_deg()` where `heading` is the direction the
/// view was taken facing; azimuth grows counterclockwise.
#[derive(Clone, Debug, PartialEq)]
pub struct Panorama {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Panorama {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width < MIN_WIDTH {
            return Err(Error::InvalidImage(format!(
                "width {width} is below the minimum of {MIN_WIDTH}"
            )));
        }
        if height == 0 {
            return Err(Error::InvalidImage("height must be at least 1".into()));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "{} pixels supplied for a {width}x{height} panorama",
                pixels.len()
            )));
        }
        if let Some(v) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidImage(format!("intensity {v} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds a panorama from `f(row, col)`.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                pixels.push(f(r, c));
            }
        }
        Self::new(width, height, pixels)
    }

    /// Converts 8-bit samples with `v / 255`.
    pub fn from_u8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(
            width,
            height,
            bytes.iter().map(|&b| f64::from(b) / 255.0).collect(),
        )
    }

    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.pixels[row * self.width..(row + 1) * self.width]
    }

    /// Degrees of azimuth covered by one column.
    pub fn step_deg(&self) -> f64 {
        360.0 / self.width as f64
    }

    /// Cyclic column shift: output column `j` is input column `(j + k) mod width`.
    ///
    /// Shifting by `k` turns a view taken at heading `h` into the view at
    /// heading `h + k * step_deg()`.
    pub fn rotate(&self, k: i64) -> Panorama {
        let w = self.width;
        let shift = k.rem_euclid(w as i64) as usize;
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for r in 0..self.height {
            let row = self.row(r);
            pixels.extend_from_slice(&row[shift..]);
            pixels.extend_from_slice(&row[..shift]);
        }
        Panorama {
            width: w,
            height: self.height,
            pixels,
        }
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }
}

/// Three-channel image as delivered by external databases.
#[derive(Clone, Debug, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub r: Vec<f64>,
    pub g: Vec<f64>,
    pub b: Vec<f64>,
}

/// Luma conversion `0.299 r + 0.587 g + 0.114 b`, clamped to `[0, 1]`.
pub fn to_grayscale(rgb: &RgbImage) -> Result<Panorama> {
    let n = rgb.width * rgb.height;
    if rgb.r.len() != n || rgb.g.len() != n || rgb.b.len() != n {
        return Err(Error::InvalidImage(format!(
            "channel sizes {}/{}/{} do not match {}x{}",
            rgb.r.len(),
            rgb.g.len(),
            rgb.b.len(),
            rgb.width,
            rgb.height
        )));
    }
    let pixels = (0..n)
        .map(|i| (0.299 * rgb.r[i] + 0.587 * rgb.g[i] + 0.114 * rgb.b[i]).clamp(0.0, 1.0))
        .collect();
    Panorama::new(rgb.width, rgb.height, pixels)
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|x| (-(x * x) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable Gaussian blur. Columns wrap cyclically; rows clamp at the edges.
/// `sigma == 0` returns the input unchanged.
pub fn gaussian_smooth(p: &Panorama, sigma: f64) -> Result<Panorama> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!(
            "gaussian sigma {sigma} must be >= 0"
        )));
    }
    if sigma == 0.0 {
        return Ok(p.clone());
    }
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as i64;
    let (w, h) = p.dims();

    let mut horiz = vec![0.0; w * h];
    for r in 0..h {
        let row = p.row(r);
        for c in 0..w {
            let mut acc = 0.0;
            for (t, kv) in kernel.iter().enumerate() {
                let src = (c as i64 + t as i64 - radius).rem_euclid(w as i64) as usize;
                acc += kv * row[src];
            }
            horiz[r * w + c] = acc;
        }
    }

    let mut out = vec![0.0; w * h];
    for r in 0..h {
        for (t, kv) in kernel.iter().enumerate() {
            let src = (r as i64 + t as i64 - radius).clamp(0, h as i64 - 1) as usize;
            let src_row = &horiz[src * w..(src + 1) * w];
            let dst = &mut out[r * w..(r + 1) * w];
            for (d, s) in dst.iter_mut().zip(src_row) {
                *d += kv * s;
            }
        }
    }
    out.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    Panorama::new(w, h, out)
}

/// Block-mean downsampling by an integer factor.
///
/// Output is `floor(width / factor)` by `floor(height / factor)`; trailing
/// rows and columns that do not fill a whole block are dropped. When the
/// factor exceeds the height the output keeps a single row whose blocks
/// average every source row.
pub fn resize_down(p: &Panorama, factor: usize) -> Result<Panorama> {
    if factor == 0 {
        return Err(Error::invalid("resize factor must be >= 1"));
    }
    if factor == 1 {
        return Ok(p.clone());
    }
    let (w, h) = p.dims();
    let out_w = w / factor;
    if out_w < MIN_WIDTH {
        return Err(Error::invalid(format!(
            "resize factor {factor} leaves width {out_w} (< {MIN_WIDTH}) from {w}"
        )));
    }
    let (out_h, block_h) = if h / factor == 0 {
        (1, h)
    } else {
        (h / factor, factor)
    };
    let inv = 1.0 / (factor * block_h) as f64;
    let mut out = Vec::with_capacity(out_w * out_h);
    for orow in 0..out_h {
        for ocol in 0..out_w {
            let mut acc = 0.0;
            for r in orow * block_h..(orow + 1) * block_h {
                let row = p.row(r);
                acc += row[ocol * factor..(ocol + 1) * factor].iter().sum::<f64>();
            }
            out.push((acc * inv).clamp(0.0, 1.0));
        }
    }
    Panorama::new(out_w, out_h, out)
}

/// Preprocessing applied to every view before matching or learning.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PreprocessConfig {
    /// Collapse colour input to luma. Panoramas are already single channel,
    /// so this only affects [`preprocess_rgb`].
    pub to_grayscale: bool,
    pub gaussian_sigma: f64,
    pub resize_factor: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self::identity()
    }
}

impl PreprocessConfig {
    pub const fn identity() -> Self {
        Self {
            to_grayscale: true,
            gaussian_sigma: 0.0,
            resize_factor: 1,
        }
    }

    pub const fn new(gaussian_sigma: f64, resize_factor: usize) -> Self {
        Self {
            to_grayscale: true,
            gaussian_sigma,
            resize_factor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.resize_factor == 0 {
            return Err(Error::invalid("resize_factor must be >= 1"));
        }
        if !(self.gaussian_sigma >= 0.0) || !self.gaussian_sigma.is_finite() {
            return Err(Error::invalid("gaussian_sigma must be >= 0"));
        }
        Ok(())
    }

    /// Output dimensions for an input of `dims`.
    pub fn output_dims(&self, dims: (usize, usize)) -> (usize, usize) {
        let f = self.resize_factor.max(1);
        let h = if dims.1 / f == 0 { 1 } else { dims.1 / f };
        (dims.0 / f, h)
    }
}

/// Gaussian smoothing then block resize, in that order.
pub fn preprocess(p: &Panorama, cfg: &PreprocessConfig) -> Result<Panorama> {
    cfg.validate()?;
    let smoothed = gaussian_smooth(p, cfg.gaussian_sigma)?;
    resize_down(&smoothed, cfg.resize_factor)
}

/// Grayscale conversion followed by [`preprocess`].
pub fn preprocess_rgb(rgb: &RgbImage, cfg: &PreprocessConfig) -> Result<Panorama> {
    let gray = if cfg.to_grayscale {
        to_grayscale(rgb)?
    } else {
        // Without conversion the green channel stands in for luminance.
        Panorama::new(rgb.width, rgb.height, rgb.g.clone())?
    };
    preprocess(&gray, cfg)
}
