//! Blur kernels rasterized from trajectories.
//!
//! Each trajectory sample deposits `1 / M` of mass, split bilinearly over
//! the four pixels around it. The path is first translated so the center of
//! its bounding box lands on the canvas center pixel.

use std::fmt::Write as _;
use std::path::Path;

use image::{DynamicImage, GrayImage};

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

pub const KERNEL_MAGIC: &str = "KERN1";

/// Unit-sum tolerance accepted when loading or constructing a kernel.
pub const LOAD_SUM_TOLERANCE: f64 = 1e-6;

// slack for positions that land a rounding error outside the margin
const FIT_EPS: f64 = 1e-9;

/// Non-negative, unit-sum point-spread function on an odd-sided grid.
///
/// Weights are row-major; row `y` is the vertical (imaginary) axis.
#[derive(Debug, Clone, PartialEq)]
pub struct BlurKernel {
    width: usize,
    height: usize,
    weights: Vec<f64>,
}

impl BlurKernel {
    /// Checks oddness, non-negativity and unit sum (within [`LOAD_SUM_TOLERANCE`]).
    pub fn new(width: usize, height: usize, weights: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || width.is_multiple_of(2) || height.is_multiple_of(2) {
            return Err(Error::InvalidKernel(format!(
                "sides must be odd and positive, got {width}x{height}"
            )));
        }
        if weights.len() != width * height {
            return Err(Error::InvalidKernel(format!(
                "{width}x{height} kernel needs {} weights, got {}",
                width * height,
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidKernel(format!("weight {w} is not a finite non-negative number")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > LOAD_SUM_TOLERANCE {
            return Err(Error::InvalidKernel(format!("weights sum to {sum}, not 1")));
        }
        Ok(Self { width, height, weights })
    }

    /// Scale non-negative raw weights to unit sum.
    pub fn normalized(width: usize, height: usize, mut weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(Error::InvalidKernel(format!("cannot normalize weights summing to {sum}")));
        }
        for w in &mut weights {
            *w /= sum;
        }
        Self::new(width, height, weights)
    }

    /// Identity kernel: all mass on the center of a `side x side` grid.
    pub fn delta(side: usize) -> Result<Self> {
        let mut weights = vec![0.0; side * side];
        if side % 2 == 1 {
            weights[side * side / 2] = 1.0;
        }
        Self::new(side, side, weights)
    }

    /// Box kernel with equal weights.
    pub fn uniform(width: usize, height: usize) -> Result<Self> {
        Self::normalized(width, height, vec![1.0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.weights[y * self.width + x]
    }

    pub fn center(&self) -> (usize, usize) {
        (self.width / 2, self.height / 2)
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    /// Number of strictly positive weights.
    pub fn support_size(&self) -> usize {
        self.weights.iter().filter(|w| **w > 0.0).count()
    }

    /// If all mass sits on one pixel, its offset from the center.
    pub fn as_shift(&self) -> Option<(isize, isize)> {
        let mut nonzero = self.weights.iter().enumerate().filter(|(_, w)| **w > 0.0);
        let (i, w) = nonzero.next()?;
        if nonzero.next().is_some() || *w != 1.0 {
            return None;
        }
        let (cx, cy) = self.center();
        Some(((i % self.width) as isize - cx as isize, (i / self.width) as isize - cy as isize))
    }

    /// KERN1 text: magic, `width height`, then one row of weights per line.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.weights.len() * 24 + 16);
        out.push_str(KERNEL_MAGIC);
        out.push('\n');
        let _ = writeln!(out, "{} {}", self.width, self.height);
        for row in self.weights.chunks(self.width) {
            for (i, w) in row.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{w:.16e}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::MalformedKernelFile(msg);
        let mut lines = text.split('\n');
        if lines.next() != Some(KERNEL_MAGIC) {
            return Err(bad("missing KERN1 magic".into()));
        }
        let dims = lines.next().ok_or_else(|| bad("missing dimension line".into()))?;
        let dims: Vec<&str> = dims.split(' ').collect();
        let [w, h] = dims.as_slice() else {
            return Err(bad(format!("dimension line has {} fields", dims.len())));
        };
        let width: usize = w.parse().map_err(|_| bad(format!("bad width {w:?}")))?;
        let height: usize = h.parse().map_err(|_| bad(format!("bad height {h:?}")))?;

        let mut weights = Vec::with_capacity(width.saturating_mul(height).min(1 << 24));
        for row in 0..height {
            let line = lines
                .next()
                .filter(|l| !l.is_empty())
                .ok_or_else(|| bad(format!("expected {height} rows, found {row}")))?;
            let before = weights.len();
            for tok in line.split(' ') {
                weights.push(tok.parse::<f64>().map_err(|_| bad(format!("bad weight {tok:?}")))?);
            }
            if weights.len() - before != width {
                return Err(bad(format!(
                    "row {row} has {} weights, expected {width}",
                    weights.len() - before
                )));
            }
        }
        if lines.any(|l| !l.is_empty()) {
            return Err(bad("trailing data after last row".into()));
        }
        Self::new(width, height, weights).map_err(|e| match e {
            Error::InvalidKernel(msg) => Error::MalformedKernelFile(msg),
            other => other,
        })
    }
}

pub fn write_kernel(k: &BlurKernel, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, k.to_text())?;
    Ok(())
}

pub fn read_kernel(path: impl AsRef<Path>) -> Result<BlurKernel> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::MalformedKernelFile(format!("{}: {e}", path.display())))?;
    BlurKernel::from_text(&text)
}

/// Grayscale rendering with the largest weight mapped to 255.
pub fn preview_image(k: &BlurKernel) -> GrayImage {
    let max = k.max_weight();
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    let buf = k.weights.iter().map(|w| (w * scale).round().clamp(0.0, 255.0) as u8).collect();
    GrayImage::from_raw(k.width as u32, k.height as u32, buf).expect("sized buffer")
}

/// Save [`preview_image`] as an 8-bit PNG.
pub fn kernel_preview(k: &BlurKernel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    DynamicImage::ImageLuma8(preview_image(k))
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

/// Largest extent of the trajectory's bounding box along either axis.
fn extent(traj: &Trajectory) -> f64 {
    let (x0, y0, x1, y1) = traj.bounds();
    (x1 - x0).max(y1 - y0)
}

/// Smallest odd side that holds the centered trajectory with one pixel of
/// margin on every side.
pub fn auto_canvas(traj: &Trajectory) -> usize {
    if traj.is_empty() {
        return 3;
    }
    // samples must land in [1, side - 2] after centering
    let side = (extent(traj) + 3.0 - FIT_EPS).ceil().max(3.0) as usize;
    side | 1
}

/// Bilinearly splat the trajectory onto a `canvas x canvas` grid (or the
/// [`auto_canvas`] size) and normalize to unit sum.
pub fn rasterize(traj: &Trajectory, canvas: Option<usize>) -> Result<BlurKernel> {
    if traj.is_empty() {
        return Err(Error::InvalidParams("trajectory has no samples".into()));
    }
    let required = auto_canvas(traj);
    let side = match canvas {
        Some(s) if s % 2 == 0 => {
            return Err(Error::InvalidParams(format!("canvas side must be odd, got {s}")));
        }
        Some(s) if s < required => return Err(Error::CanvasTooSmall { required, given: s }),
        Some(s) => s,
        None => required,
    };

    let (x0, y0, x1, y1) = traj.bounds();
    let center = ((side - 1) / 2) as f64;
    let (dx, dy) = (center - 0.5 * (x0 + x1), center - 0.5 * (y0 + y1));
    let (lo, hi) = (1.0, (side - 2) as f64);

    let mut raw = vec![0.0; side * side];
    let mass = 1.0 / traj.len() as f64;
    for z in &traj.samples {
        let (px, py) = (z.re + dx, z.im + dy);
        if px < lo - FIT_EPS || px > hi + FIT_EPS || py < lo - FIT_EPS || py > hi + FIT_EPS {
            return Err(Error::CanvasTooSmall { required, given: side });
        }
        let (px, py) = (px.clamp(lo, hi), py.clamp(lo, hi));
        let (ix, iy) = (px.floor() as usize, py.floor() as usize);
        let (fx, fy) = (px - ix as f64, py - iy as f64);
        let base = iy * side + ix;
        raw[base] += mass * (1.0 - fx) * (1.0 - fy);
        raw[base + 1] += mass * fx * (1.0 - fy);
        raw[base + side] += mass * (1.0 - fx) * fy;
        raw[base + side + 1] += mass * fx * fy;
    }
    BlurKernel::normalized(side, side, raw)
}
