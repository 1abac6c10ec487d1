//! Uniform blur: `blurred = kernel * sharp + noise`.
//!
//! Convolution keeps the input size and clamps out-of-range reads to the
//! nearest edge pixel (replicate boundary). Work is split per channel and per
//! row only, so the result does not depend on the thread count.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::kernel::BlurKernel;
use crate::rng::SeededRng;

/// Kernels with at most this many taps are applied directly by [`convolve_fast`].
pub const DIRECT_MAX_TAPS: usize = 64;

/// Additive Gaussian noise: standard deviation in `[0, 1]` sample units.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma >= 0.0 && self.sigma.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("noise sigma must be >= 0, got {}", self.sigma)))
        }
    }
}

#[inline]
fn clamp_index(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Reference convolution, `O(W H kw kh)`.
pub fn convolve_spatial(img: &ImageBuffer, k: &BlurKernel) -> ImageBuffer {
    let (w, h) = (img.width(), img.height());
    let (kw, kh) = (k.width(), k.height());
    let (cx, cy) = (k.center().0 as isize, k.center().1 as isize);
    let taps: Vec<(isize, isize, f64)> = (0..kh)
        .flat_map(|j| (0..kw).map(move |i| (i, j)))
        .map(|(i, j)| (i as isize - cx, j as isize - cy, k.get(i, j)))
        .filter(|t| t.2 != 0.0)
        .collect();

    let mut out = vec![0.0; img.data().len()];
    for c in 0..img.channels() {
        let src = img.plane(c);
        out[c * w * h..(c + 1) * w * h]
            .par_chunks_mut(w)
            .enumerate()
            .for_each(|(y, row)| {
                for (x, o) in row.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for &(dx, dy, wt) in &taps {
                        let sx = clamp_index(x as isize - dx, w);
                        let sy = clamp_index(y as isize - dy, h);
                        acc += wt * src[sy * w + sx];
                    }
                    *o = acc;
                }
            });
    }
    ImageBuffer::new(w, h, img.channels(), out).expect("shape preserved")
}

/// Convolution with automatic method choice: exact shift for single-pixel
/// kernels, direct summation for small kernels, FFT otherwise.
pub fn convolve_fast(img: &ImageBuffer, k: &BlurKernel) -> ImageBuffer {
    if let Some((dx, dy)) = k.as_shift() {
        return shift(img, dx, dy);
    }
    if k.width() * k.height() <= DIRECT_MAX_TAPS {
        convolve_spatial(img, k)
    } else {
        convolve_fft(img, k)
    }
}

/// Output pixel `(x, y)` takes input `(x - dx, y - dy)`, edge-clamped.
fn shift(img: &ImageBuffer, dx: isize, dy: isize) -> ImageBuffer {
    let (w, h) = (img.width(), img.height());
    ImageBuffer::from_fn(w, h, img.channels(), |c, x, y| {
        img.get(c, clamp_index(x as isize - dx, w), clamp_index(y as isize - dy, h))
    })
    .expect("shape preserved")
}

/// Smallest `n >= target` whose prime factors are all 2, 3 or 5.
pub fn next_fast_len(target: usize) -> usize {
    let mut n = target.max(1);
    loop {
        let mut m = n;
        for p in [2, 3, 5] {
            while m.is_multiple_of(p) {
                m /= p;
            }
        }
        if m == 1 {
            return n;
        }
        n += 1;
    }
}

struct Plan2d {
    nx: usize,
    ny: usize,
    fwd_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
}

impl Plan2d {
    fn new(nx: usize, ny: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            nx,
            ny,
            fwd_x: planner.plan_fft_forward(nx),
            fwd_y: planner.plan_fft_forward(ny),
            inv_x: planner.plan_fft_inverse(nx),
            inv_y: planner.plan_fft_inverse(ny),
        }
    }

    fn rows(fft: &Arc<dyn Fft<f64>>, data: &mut [Complex64], len: usize) {
        data.par_chunks_mut(len).for_each_init(
            || vec![Complex64::default(); fft.get_inplace_scratch_len()],
            |scratch, row| fft.process_with_scratch(row, scratch),
        );
    }

    /// Row-major `ny x nx` in, transposed spectrum (`nx x ny`) out.
    fn forward(&self, data: &mut Vec<Complex64>) {
        Self::rows(&self.fwd_x, data, self.nx);
        *data = transpose(data, self.nx, self.ny);
        Self::rows(&self.fwd_y, data, self.ny);
    }

    /// Inverse of [`Plan2d::forward`], including the `1 / (nx ny)` scale.
    fn inverse(&self, data: &mut Vec<Complex64>) {
        Self::rows(&self.inv_y, data, self.ny);
        *data = transpose(data, self.ny, self.nx);
        Self::rows(&self.inv_x, data, self.nx);
        let scale = 1.0 / (self.nx * self.ny) as f64;
        data.par_iter_mut().for_each(|z| *z *= scale);
    }
}

/// `rows x cols` row-major -> `cols x rows` row-major.
fn transpose(src: &[Complex64], cols: usize, rows: usize) -> Vec<Complex64> {
    const B: usize = 32;
    let mut dst = vec![Complex64::default(); src.len()];
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
    dst
}

/// Frequency-domain convolution with replicate pre-padding.
///
/// The image is padded by the kernel radius on each side, then circularly
/// convolved on a grid at least as large as the padded image. The kept
/// window never touches wrapped-around samples. Two real channels share one
/// complex transform (real and imaginary parts) since the kernel is real.
pub fn convolve_fft(img: &ImageBuffer, k: &BlurKernel) -> ImageBuffer {
    let (w, h) = (img.width(), img.height());
    let (kw, kh) = (k.width(), k.height());
    let (rx, ry) = (kw / 2, kh / 2);
    let (pw, ph) = (w + 2 * rx, h + 2 * ry);
    let plan = Plan2d::new(next_fast_len(pw), next_fast_len(ph));
    let (nx, ny) = (plan.nx, plan.ny);

    let mut kspec = vec![Complex64::default(); nx * ny];
    for j in 0..kh {
        for i in 0..kw {
            kspec[j * nx + i] = Complex64::new(k.get(i, j), 0.0);
        }
    }
    plan.forward(&mut kspec);

    let padded = |c: usize, u: usize, v: usize| {
        img.get(
            c,
            clamp_index(u as isize - rx as isize, w),
            clamp_index(v as isize - ry as isize, h),
        )
    };

    let mut out = vec![0.0; img.data().len()];
    let channels: Vec<usize> = (0..img.channels()).collect();
    for pair in channels.chunks(2) {
        let (re_c, im_c) = (pair[0], pair.get(1).copied());
        let mut buf = vec![Complex64::default(); nx * ny];
        buf.par_chunks_mut(nx).take(ph).enumerate().for_each(|(v, row)| {
            for (u, z) in row.iter_mut().take(pw).enumerate() {
                *z = Complex64::new(padded(re_c, u, v), im_c.map_or(0.0, |c| padded(c, u, v)));
            }
        });
        plan.forward(&mut buf);
        buf.par_iter_mut().zip(kspec.par_iter()).for_each(|(a, b)| *a *= b);
        plan.inverse(&mut buf);

        for y in 0..h {
            let src = &buf[(y + 2 * ry) * nx + 2 * rx..][..w];
            let re_dst = &mut out[(re_c * h + y) * w..][..w];
            for (d, z) in re_dst.iter_mut().zip(src) {
                *d = z.re;
            }
            if let Some(c) = im_c {
                let im_dst = &mut out[(c * h + y) * w..][..w];
                for (d, z) in im_dst.iter_mut().zip(src) {
                    *d = z.im;
                }
            }
        }
    }
    ImageBuffer::new(w, h, img.channels(), out).expect("shape preserved")
}

/// Blur with `k`, add i.i.d. `N(0, sigma^2)` noise per sample, clamp to `[0, 1]`.
pub fn apply_blur(img: &ImageBuffer, k: &BlurKernel, noise: &NoiseSpec) -> Result<ImageBuffer> {
    noise.validate()?;
    let blurred = convolve_fast(img, k);
    if noise.sigma == 0.0 {
        return Ok(blurred);
    }
    let (w, h, c) = (blurred.width(), blurred.height(), blurred.channels());
    let mut data = blurred.into_data();
    let mut rng = SeededRng::new(noise.seed);
    for chunk in data.chunks_mut(2) {
        let (a, b) = rng.normal_pair();
        chunk[0] += noise.sigma * a;
        if let Some(v) = chunk.get_mut(1) {
            *v += noise.sigma * b;
        }
    }
    ImageBuffer::new(w, h, c, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise_image(w: usize, h: usize, c: usize, seed: u64) -> ImageBuffer {
        let mut rng = SeededRng::new(seed);
        ImageBuffer::from_fn(w, h, c, |_, _, _| rng.uniform()).unwrap()
    }

    fn random_kernel(kw: usize, kh: usize, seed: u64) -> BlurKernel {
        let mut rng = SeededRng::new(seed);
        BlurKernel::normalized(kw, kh, (0..kw * kh).map(|_| rng.uniform()).collect()).unwrap()
    }

    /// Straight transcription of the convolution sum, no shared helpers.
    fn oracle(img: &ImageBuffer, k: &BlurKernel) -> Vec<f64> {
        let (w, h) = (img.width() as i64, img.height() as i64);
        let (kw, kh) = (k.width() as i64, k.height() as i64);
        let mut out = Vec::new();
        for c in 0..img.channels() {
            for y in 0..h {
                for x in 0..w {
                    let mut s = 0.0;
                    for j in 0..kh {
                        for i in 0..kw {
                            let sx = (x - (i - kw / 2)).max(0).min(w - 1);
                            let sy = (y - (j - kh / 2)).max(0).min(h - 1);
                            s += k.get(i as usize, j as usize) * img.get(c, sx as usize, sy as usize);
                        }
                    }
                    out.push(s);
                }
            }
        }
        out
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn delta_is_identity_on_both_paths() {
        let img = noise_image(13, 9, 3, 1);
        for side in [1, 3, 9, 31] {
            let k = BlurKernel::delta(side).unwrap();
            assert_eq!(convolve_spatial(&img, &k), img);
            assert_eq!(convolve_fast(&img, &k), img);
            assert!(max_abs_diff(convolve_fft(&img, &k).data(), img.data()) < 1e-12);
        }
    }

    #[test]
    fn constant_image_is_preserved() {
        let img = ImageBuffer::filled(20, 17, 3, 0.37).unwrap();
        let k = random_kernel(9, 5, 3);
        for out in [convolve_spatial(&img, &k), convolve_fft(&img, &k)] {
            assert!(out.data().iter().all(|v| (v - 0.37).abs() < 1e-12));
        }
    }

    #[test]
    fn spatial_matches_brute_force_oracle() {
        let img = noise_image(16, 16, 3, 7);
        let k = random_kernel(5, 5, 8);
        assert!(max_abs_diff(convolve_spatial(&img, &k).data(), &oracle(&img, &k)) <= 1e-12);
    }

    #[test]
    fn kernel_orientation_is_a_true_convolution() {
        // impulse at (2, 2) picks up the kernel unflipped around it
        let img = ImageBuffer::from_fn(5, 5, 1, |_, x, y| if (x, y) == (2, 2) { 1.0 } else { 0.0 }).unwrap();
        let mut weights = vec![0.0; 9];
        weights[5] = 0.25; // (2, 1): right of center
        weights[4] = 0.75;
        let k = BlurKernel::new(3, 3, weights).unwrap();
        for out in [convolve_spatial(&img, &k), convolve_fft(&img, &k)] {
            assert!((out.get(0, 3, 2) - 0.25).abs() < 1e-12);
            assert!(out.get(0, 1, 2).abs() < 1e-12);
        }
    }

    #[test]
    fn fft_matches_spatial_across_shapes() {
        let mut seed = 0;
        for (w, h) in [(8, 8), (17, 11), (64, 40), (5, 60)] {
            for (kw, kh) in [(3, 3), (9, 9), (31, 31), (1, 7), (15, 3)] {
                seed += 1;
                let img = noise_image(w, h, if seed % 2 == 0 { 3 } else { 1 }, seed);
                let k = random_kernel(kw, kh, seed + 1000);
                let d = max_abs_diff(convolve_fft(&img, &k).data(), convolve_spatial(&img, &k).data());
                assert!(d <= 1e-5, "{w}x{h} * {kw}x{kh}: {d}");
            }
        }
    }

    #[test]
    fn linearity_on_interior() {
        let (a, b) = (noise_image(32, 32, 1, 1), noise_image(32, 32, 1, 2));
        let k = random_kernel(7, 7, 3);
        let mix = ImageBuffer::from_fn(32, 32, 1, |c, x, y| 0.3 * a.get(c, x, y) + 0.6 * b.get(c, x, y)).unwrap();
        let (ka, kb, km) = (convolve_fast(&a, &k), convolve_fast(&b, &k), convolve_fast(&mix, &k));
        for y in 3..29 {
            for x in 3..29 {
                let expect = 0.3 * ka.get(0, x, y) + 0.6 * kb.get(0, x, y);
                assert!((km.get(0, x, y) - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn fast_lengths() {
        assert_eq!(next_fast_len(1), 1);
        assert_eq!(next_fast_len(7), 8);
        assert_eq!(next_fast_len(97), 100);
        assert_eq!(next_fast_len(842), 864);
    }

    #[test]
    fn zero_noise_matches_convolution() {
        let img = noise_image(40, 30, 3, 5);
        let k = random_kernel(11, 11, 6);
        let out = apply_blur(&img, &k, &NoiseSpec { sigma: 0.0, seed: 9 }).unwrap();
        assert_eq!(out, convolve_fast(&img, &k));
        let id = apply_blur(&img, &BlurKernel::delta(1).unwrap(), &NoiseSpec::none()).unwrap();
        assert_eq!(id, img);
    }

    #[test]
    fn noise_has_requested_std() {
        let img = ImageBuffer::filled(1000, 1000, 1, 0.5).unwrap();
        let out = apply_blur(&img, &BlurKernel::delta(1).unwrap(), &NoiseSpec { sigma: 0.1, seed: 1 }).unwrap();
        let n = out.data().len() as f64;
        let mean = out.data().iter().sum::<f64>() / n;
        let var = out.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var.sqrt() - 0.1).abs() <= 0.002, "{}", var.sqrt());
    }

    #[test]
    fn negative_sigma_is_rejected() {
        let img = ImageBuffer::filled(3, 3, 1, 0.5).unwrap();
        let k = BlurKernel::delta(1).unwrap();
        assert!(apply_blur(&img, &k, &NoiseSpec { sigma: -0.1, seed: 0 }).is_err());
    }
}
