//! Planar floating-point images and their 8-bit codecs.

use std::path::Path;

use image::{DynamicImage, GrayImage, RgbImage};

use crate::error::{Error, Result};

/// Planar image with samples in `[0, 1]`.
///
/// Channel `c`, row `y`, column `x` lives at `data[(c * height + y) * width + x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParams(format!("empty image {width}x{height}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidParams(format!("unsupported channel count {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::dims(
                format!("{width}x{height}x{channels}"),
                format!("{} samples", data.len()),
            ));
        }
        let mut img = Self {
            width,
            height,
            channels,
            data,
        };
        img.clamp();
        Ok(img)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Build from a function of `(channel, x, y)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, x, y));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.width * self.height;
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, x: usize, y: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// `"WxHxC"`, used in error messages.
    pub fn shape(&self) -> String {
        format!("{}x{}x{}", self.width, self.height, self.channels)
    }

    pub fn same_shape(&self, other: &ImageBuffer) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub(crate) fn clamp(&mut self) {
        for v in &mut self.data {
            // NaN maps to 0
            *v = if *v >= 0.0 { v.min(1.0) } else { 0.0 };
        }
    }

    /// Samples quantized to 8 bits, in planar order.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }

    pub fn from_u8(width: usize, height: usize, channels: usize, planar: &[u8]) -> Result<Self> {
        Self::new(
            width,
            height,
            channels,
            planar.iter().map(|&b| b as f64 / 255.0).collect(),
        )
    }

    /// Sub-image at `(x, y)` of size `w x h`.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<Self> {
        if w == 0 || h == 0 || x + w > self.width || y + h > self.height {
            return Err(Error::InvalidParams(format!(
                "crop {w}x{h}+{x}+{y} outside {}x{} image",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(w * h * self.channels);
        for c in 0..self.channels {
            let plane = self.plane(c);
            for row in y..y + h {
                data.extend_from_slice(&plane[row * self.width + x..row * self.width + x + w]);
            }
        }
        Ok(Self {
            width: w,
            height: h,
            channels: self.channels,
            data,
        })
    }

    /// Box-filter downscale by an integer factor; trailing rows and columns
    /// that do not fill a whole block are dropped.
    pub fn downscale(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::InvalidParams("downscale factor must be >= 1".into()));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let (w, h) = (self.width / factor, self.height / factor);
        if w == 0 || h == 0 {
            return Err(Error::ImageTooSmall {
                width: self.width,
                height: self.height,
                min: factor,
            });
        }
        let norm = 1.0 / (factor * factor) as f64;
        Self::from_fn(w, h, self.channels, |c, x, y| {
            let plane = self.plane(c);
            let mut sum = 0.0;
            for yy in y * factor..(y + 1) * factor {
                let row = &plane[yy * self.width..(yy + 1) * self.width];
                sum += row[x * factor..(x + 1) * factor].iter().sum::<f64>();
            }
            sum * norm
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self::from_dynamic(&img))
    }

    pub fn from_dynamic(img: &DynamicImage) -> Self {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let n = w * h;
        let (channels, data) = if img.color().has_color() {
            let rgb = img.to_rgb8();
            let mut data = vec![0.0; 3 * n];
            for (i, px) in rgb.pixels().enumerate() {
                for c in 0..3 {
                    data[c * n + i] = px.0[c] as f64 / 255.0;
                }
            }
            (3, data)
        } else {
            let gray = img.to_luma8();
            (1, gray.pixels().map(|p| p.0[0] as f64 / 255.0).collect())
        };
        Self {
            width: w,
            height: h,
            channels,
            data,
        }
    }

    /// Interleaved 8-bit image.
    pub fn to_dynamic(&self) -> DynamicImage {
        let (w, h) = (self.width as u32, self.height as u32);
        let n = self.width * self.height;
        if self.channels == 1 {
            let buf: Vec<u8> = self.data.iter().map(|&v| quantize(v)).collect();
            DynamicImage::ImageLuma8(GrayImage::from_raw(w, h, buf).expect("sized buffer"))
        } else {
            let mut buf = vec![0u8; 3 * n];
            for i in 0..n {
                for c in 0..3 {
                    buf[3 * i + c] = quantize(self.data[c * n + i]);
                }
            }
            DynamicImage::ImageRgb8(RgbImage::from_raw(w, h, buf).expect("sized buffer"))
        }
    }

    /// Write an 8-bit PNG (grayscale or RGB).
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.to_dynamic()
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })
    }
}

/// Round a `[0, 1]` sample to the nearest 8-bit level.
#[inline]
pub fn quantize(v: f64) -> u8 {
    let v = if v >= 0.0 { v.min(1.0) } else { 0.0 };
    (v * 255.0).round() as u8
}

/// Image files (PNG or JPEG by extension) directly inside `dir`, sorted by name.
pub fn list_images(dir: impl AsRef<Path>) -> Result<Vec<std::path::PathBuf>> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir.to_path_buf()));
    }
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_file() && is_image_path(&path) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn is_image_path(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
        .unwrap_or(false)
}
