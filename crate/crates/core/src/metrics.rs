//! PSNR and SSIM between image pairs, and dataset-level aggregation.
//!
//! Both metrics work on 8-bit quantized samples so that in-memory and
//! file-based evaluation agree:
//!
//! * PSNR pools the squared error over every sample of every channel with a
//!   peak of 255. Identical images (and anything above it) report
//!   [`PSNR_CAP_DB`].
//! * SSIM runs on BT.601 luma in `[0, 255]` with an 11x11 Gaussian window
//!   (sigma 1.5), `C1 = (0.01 * 255)^2`, `C2 = (0.03 * 255)^2`, averaged over
//!   every window position that fits entirely inside the image.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{list_images, ImageBuffer};

pub const PSNR_CAP_DB: f64 = 100.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
pub const SSIM_C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

fn check_shapes(a: &ImageBuffer, b: &ImageBuffer) -> Result<()> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(Error::dims(a.shape(), b.shape()))
    }
}

/// Peak signal-to-noise ratio in dB, capped at [`PSNR_CAP_DB`].
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    check_shapes(a, b)?;
    let sse: u64 = a
        .to_u8()
        .iter()
        .zip(b.to_u8())
        .map(|(&x, y)| {
            let d = x.abs_diff(y) as u64;
            d * d
        })
        .sum();
    if sse == 0 {
        return Ok(PSNR_CAP_DB);
    }
    let mse = sse as f64 / a.data().len() as f64;
    Ok((10.0 * (255.0 * 255.0 / mse).log10()).min(PSNR_CAP_DB))
}

/// 8-bit quantized luma in `[0, 255]`, row-major.
pub fn luma_u8_scale(img: &ImageBuffer) -> Vec<f64> {
    let q = img.to_u8();
    let n = img.width() * img.height();
    if img.channels() == 1 {
        return q.iter().map(|&v| v as f64).collect();
    }
    (0..n)
        .map(|i| 0.299 * q[i] as f64 + 0.587 * q[n + i] as f64 + 0.114 * q[2 * n + i] as f64)
        .collect()
}

/// Normalized 1D Gaussian taps; the 2D window is their outer product.
pub fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let mid = (size / 2) as f64;
    let raw: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - mid;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

/// Separable filtering keeping only positions where the window fits.
fn filter_valid(src: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let n = taps.len();
    let (ow, oh) = (w + 1 - n, h + 1 - n);
    let mut horiz = vec![0.0; ow * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            horiz[y * ow + x] = taps.iter().zip(&row[x..x + n]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps.iter().enumerate().map(|(j, t)| t * horiz[(y + j) * ow + x]).sum();
        }
    }
    out
}

/// Mean structural similarity on luma.
pub fn ssim(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    check_shapes(a, b)?;
    let (w, h) = (a.width(), a.height());
    if w.min(h) < SSIM_WINDOW {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min: SSIM_WINDOW,
        });
    }
    let (la, lb) = (luma_u8_scale(a), luma_u8_scale(b));
    let taps = gaussian_taps(SSIM_WINDOW, SSIM_SIGMA);
    let product = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).collect::<Vec<_>>();

    let mu_a = filter_valid(&la, w, h, &taps);
    let mu_b = filter_valid(&lb, w, h, &taps);
    let e_aa = filter_valid(&product(&la, &la), w, h, &taps);
    let e_bb = filter_valid(&product(&lb, &lb), w, h, &taps);
    let e_ab = filter_valid(&product(&la, &lb), w, h, &taps);

    let mut total = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let var_a = e_aa[i] - ma * ma;
        let var_b = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        let num = (2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2);
        let den = (ma * ma + mb * mb + SSIM_C1) * (var_a + var_b + SSIM_C2);
        total += num / den;
    }
    Ok(total / mu_a.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub pair_id: String,
    pub psnr_db: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFailure {
    pub pair_id: String,
    pub error: String,
}

/// Per-pair scores sorted by pair id, plus their arithmetic means.
///
/// The means are `None` when no pair could be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub per_pair: Vec<PairMetrics>,
    pub mean_psnr: Option<f64>,
    pub mean_ssim: Option<f64>,
    pub failures: Vec<PairFailure>,
    pub psnr_cap_db: f64,
}

impl MetricReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `pair_id,psnr_db,ssim` rows followed by a `mean,...` row.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["pair_id", "psnr_db", "ssim"])?;
        for p in &self.per_pair {
            wtr.write_record([p.pair_id.clone(), p.psnr_db.to_string(), p.ssim.to_string()])?;
        }
        let fmt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        wtr.write_record(["mean".to_string(), fmt(self.mean_psnr), fmt(self.mean_ssim)])?;
        wtr.flush()?;
        Ok(())
    }
}

/// Two images to compare. `reference` is the sharp side when known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairInput {
    pub pair_id: String,
    pub reference: PathBuf,
    pub candidate: PathBuf,
}

/// Pair files with the same name in both directories.
///
/// Names present on one side only still produce a pair; it fails later with
/// `MissingFile`.
pub fn pairs_from_dirs(a: impl AsRef<Path>, b: impl AsRef<Path>) -> Result<Vec<PairInput>> {
    let (a, b) = (a.as_ref(), b.as_ref());
    let names = |dir: &Path| -> Result<Vec<String>> {
        Ok(list_images(dir)?
            .into_iter()
            .filter_map(|p| p.file_name().and_then(|n| n.to_str()).map(str::to_owned))
            .collect())
    };
    let all: BTreeSet<String> = names(a)?.into_iter().chain(names(b)?).collect();
    Ok(all
        .into_iter()
        .map(|name| PairInput {
            reference: a.join(&name),
            candidate: b.join(&name),
            pair_id: name,
        })
        .collect())
}

fn evaluate_one(pair: &PairInput) -> Result<PairMetrics> {
    let a = ImageBuffer::load(&pair.reference)?;
    let b = ImageBuffer::load(&pair.candidate)?;
    Ok(PairMetrics {
        pair_id: pair.pair_id.clone(),
        psnr_db: psnr(&a, &b)?,
        ssim: ssim(&a, &b)?,
    })
}

/// Score every pair; failures are collected rather than aborting the run.
pub fn evaluate_pairs(pairs: &[PairInput]) -> Result<MetricReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let results: Vec<_> = pairs.par_iter().map(|p| (p, evaluate_one(p))).collect();
    let mut per_pair = Vec::new();
    let mut failures = Vec::new();
    for (pair, res) in results {
        match res {
            Ok(m) => per_pair.push(m),
            Err(e) => failures.push(PairFailure {
                pair_id: pair.pair_id.clone(),
                error: e.to_string(),
            }),
        }
    }
    per_pair.sort_by(|x, y| x.pair_id.cmp(&y.pair_id));
    failures.sort_by(|x, y| x.pair_id.cmp(&y.pair_id));
    Ok(summarize(per_pair, failures))
}

/// Assemble a report from already computed scores.
pub fn summarize(per_pair: Vec<PairMetrics>, failures: Vec<PairFailure>) -> MetricReport {
    let n = per_pair.len() as f64;
    let mean = |f: fn(&PairMetrics) -> f64| (!per_pair.is_empty()).then(|| per_pair.iter().map(f).sum::<f64>() / n);
    MetricReport {
        mean_psnr: mean(|p| p.psnr_db),
        mean_ssim: mean(|p| p.ssim),
        per_pair,
        failures,
        psnr_cap_db: PSNR_CAP_DB,
    }
}
