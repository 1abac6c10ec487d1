//! Paired dataset construction.
//!
//! Work items are keyed by `(master_seed, index)` through
//! [`derive_item_seed`], never by execution order, so the output is the same
//! for any worker count. Each item writes only its own files; the manifest is
//! assembled afterwards in index order.
//!
//! Output layout: `sharp/`, `blurred/` and (for kernel pairs) `kernels/`
//! under the output directory, plus `manifest.jsonl`.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convolve::{apply_blur, NoiseSpec};
use crate::error::{Error, Result};
use crate::framesim::{
    list_frames, load_window, sample_window_range, simulate_frame_blur, DEFAULT_GAMMA, DEFAULT_MAX_FRAMES,
    DEFAULT_MIN_FRAMES,
};
use crate::image::{list_images, ImageBuffer};
use crate::kernel::{rasterize, write_kernel};
use crate::manifest::{
    Crop, Manifest, ManifestHeader, PairRecord, PairSource, SkippedInput, WindowInfo, MANIFEST_FILE,
    TOOLKIT_VERSION,
};
use crate::rng::{SeededRng, RNG_ALGORITHM};
use crate::trajectory::{generate_trajectory, sample_params_with, ParamOverrides};

pub use crate::rng::derive_item_seed;

pub const SHARP_DIR: &str = "sharp";
pub const BLURRED_DIR: &str = "blurred";
pub const KERNEL_DIR: &str = "kernels";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub master_seed: u64,
    /// Side of the square crop; `None` keeps the whole image.
    pub patch: Option<usize>,
    pub patches_per_image: usize,
    pub downscale: usize,
    pub noise_sigma: f64,
    pub overrides: ParamOverrides,
    /// Thread count; does not affect the output.
    #[serde(skip)]
    pub workers: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            patch: Some(256),
            patches_per_image: 1,
            downscale: 1,
            noise_sigma: 0.0,
            overrides: ParamOverrides::default(),
            workers: 1,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.into()));
        if self.patch == Some(0) {
            return bad("patch size must be positive");
        }
        if self.patches_per_image == 0 {
            return bad("patches_per_image must be at least 1");
        }
        if self.downscale == 0 {
            return bad("downscale must be at least 1");
        }
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        NoiseSpec {
            sigma: self.noise_sigma,
            seed: 0,
        }
        .validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSimConfig {
    pub master_seed: u64,
    /// Distance between consecutive window slots; `None` takes one slot per sequence.
    pub stride: Option<usize>,
    pub min_frames: usize,
    pub max_frames: usize,
    pub gamma: f64,
    #[serde(skip)]
    pub workers: usize,
}

impl Default for FrameSimConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            stride: Some(DEFAULT_MAX_FRAMES),
            min_frames: DEFAULT_MIN_FRAMES,
            max_frames: DEFAULT_MAX_FRAMES,
            gamma: DEFAULT_GAMMA,
            workers: 1,
        }
    }
}

impl FrameSimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.stride == Some(0) {
            return bad("stride must be positive".into());
        }
        if self.min_frames == 0 || self.min_frames > self.max_frames {
            return bad(format!("invalid frame range {}..={}", self.min_frames, self.max_frames));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be > 0, got {}", self.gamma));
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        Ok(())
    }
}

fn make_dirs(out: &Path, subdirs: &[&str]) -> Result<()> {
    for d in subdirs {
        let path = out.join(d);
        std::fs::create_dir_all(&path).map_err(|source| Error::UnwritableOutput { path, source })?;
    }
    Ok(())
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParams(format!("cannot start {workers} workers: {e}")))
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

fn save(img: &ImageBuffer, path: &Path) -> Result<()> {
    img.save_png(path).map_err(|e| match e {
        Error::Image {
            source: image::ImageError::IoError(source),
            path,
        } => Error::UnwritableOutput { path, source },
        other => other,
    })
}

enum Outcome {
    Pairs(Vec<PairRecord>),
    Skipped(SkippedInput),
    Undecodable(SkippedInput),
}

/// `Err` aborts the whole run.
type ItemOutcome = Result<Outcome>;

/// Blur every image in `input_dir` with freshly sampled kernels and write
/// aligned sharp/blurred crops to `output_dir`.
///
/// Image `i` (in sorted order) yields items `i * patches_per_image + r`.
/// For each item: sample parameters, generate and rasterize a trajectory,
/// blur the full (downscaled) image, then cut the same random crop from both
/// sides.
pub fn build_dataset(input_dir: impl AsRef<Path>, output_dir: impl AsRef<Path>, config: &DatasetConfig) -> Result<Manifest> {
    config.validate()?;
    let (input_dir, output_dir) = (input_dir.as_ref(), output_dir.as_ref());
    let inputs = list_images(input_dir)?;
    if inputs.is_empty() {
        return Err(Error::EmptyInput(input_dir.to_path_buf()));
    }
    make_dirs(output_dir, &[SHARP_DIR, BLURRED_DIR, KERNEL_DIR])?;

    let pool = thread_pool(config.workers)?;
    let outcomes: Vec<ItemOutcome> = pool.install(|| {
        inputs
            .par_iter()
            .enumerate()
            .map(|(i, path)| synthesize_image(i, path, output_dir, config))
            .collect()
    });

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    let mut decoded = 0;
    for outcome in outcomes {
        match outcome? {
            Outcome::Pairs(recs) => {
                decoded += 1;
                records.extend(recs);
            }
            Outcome::Skipped(skip) => {
                decoded += 1;
                skipped.push(skip);
            }
            Outcome::Undecodable(skip) => skipped.push(skip),
        }
    }
    if decoded == 0 {
        return Err(Error::EmptyInput(input_dir.to_path_buf()));
    }

    let manifest = Manifest {
        header: ManifestHeader {
            toolkit_version: TOOLKIT_VERSION.into(),
            rng_algorithm: RNG_ALGORITHM.into(),
            master_seed: config.master_seed,
            config: serde_json::json!({
                "command": "dataset",
                "input_dir": input_dir.to_string_lossy(),
                "settings": config,
            }),
            synth_real_ratio: None,
            skipped,
        },
        records,
    };
    manifest.write(output_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

fn synthesize_image(index: usize, path: &Path, out: &Path, config: &DatasetConfig) -> ItemOutcome {
    let name = file_name(path);
    let skipped = |reason: String| SkippedInput {
        path: name.clone(),
        reason,
    };
    let skip = |reason: String| Ok(Outcome::Skipped(skipped(reason)));
    let img = match ImageBuffer::load(path) {
        Ok(img) => img,
        Err(e) => return Ok(Outcome::Undecodable(skipped(format!("decode failed: {e}")))),
    };
    let img = match img.downscale(config.downscale) {
        Ok(img) => img,
        Err(e) => return skip(format!("downscale failed: {e}")),
    };
    let (w, h) = (img.width(), img.height());
    if let Some(p) = config.patch {
        if w < p || h < p {
            return skip(format!("{w}x{h} after downscale is smaller than the {p}x{p} patch"));
        }
    }

    let mut records = Vec::with_capacity(config.patches_per_image);
    for rep in 0..config.patches_per_image {
        let item = (index * config.patches_per_image + rep) as u64;
        let item_seed = derive_item_seed(config.master_seed, item);
        let mut rng = SeededRng::new(item_seed);
        let params = sample_params_with(&mut rng, &config.overrides);
        let trajectory = generate_trajectory(&params, &mut rng)?;
        let kernel = rasterize(&trajectory, None)?;
        let crop = config.patch.map(|p| Crop {
            x: rng.int_inclusive(0, (w - p) as u64) as usize,
            y: rng.int_inclusive(0, (h - p) as u64) as usize,
            w: p,
            h: p,
        });
        let noise = NoiseSpec {
            sigma: config.noise_sigma,
            seed: rng.next_u64(),
        };
        let blurred = apply_blur(&img, &kernel, &noise)?;
        let (sharp, blurred) = match crop {
            Some(c) => (img.crop(c.x, c.y, c.w, c.h)?, blurred.crop(c.x, c.y, c.w, c.h)?),
            None => (img.clone(), blurred),
        };

        let pair_id = format!("syn-{item:06}");
        let sharp_rel = format!("{SHARP_DIR}/{pair_id}.png");
        let blurred_rel = format!("{BLURRED_DIR}/{pair_id}.png");
        let kernel_rel = format!("{KERNEL_DIR}/{pair_id}.kern");
        save(&sharp, &out.join(&sharp_rel))?;
        save(&blurred, &out.join(&blurred_rel))?;
        write_kernel(&kernel, out.join(&kernel_rel))?;

        records.push(PairRecord {
            pair_id,
            sharp_path: sharp_rel,
            blurred_path: blurred_rel,
            kernel_path: Some(kernel_rel),
            master_seed: config.master_seed,
            item_seed,
            params: Some(params),
            noise_sigma: config.noise_sigma,
            crop,
            source: PairSource::SyntheticKernel,
            downscale: config.downscale,
            source_image: Some(name.clone()),
            source_size: Some([w, h]),
            window: None,
        });
    }
    Ok(Outcome::Pairs(records))
}

/// Window slot `[start, start + max_frames)` inside one sequence.
struct Slot {
    sequence: String,
    frames: std::sync::Arc<Vec<PathBuf>>,
    start: usize,
}

/// Average windows of high-frame-rate sequences (one subdirectory of frames
/// each) into blurred/sharp pairs.
///
/// Slots start at `0, stride, 2 * stride, ...` while a full `max_frames`
/// slot fits; within each slot a window is drawn with
/// [`sample_window_range`]. Sequences shorter than `max_frames` are skipped
/// and listed in the header.
pub fn build_framesim_dataset(
    frames_root: impl AsRef<Path>,
    output_dir: impl AsRef<Path>,
    config: &FrameSimConfig,
) -> Result<Manifest> {
    config.validate()?;
    let (root, output_dir) = (frames_root.as_ref(), output_dir.as_ref());
    if !root.is_dir() {
        return Err(Error::MissingFile(root.to_path_buf()));
    }
    let mut sequences: Vec<PathBuf> = std::fs::read_dir(root)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    sequences.retain(|p| p.is_dir());
    sequences.sort();
    if sequences.is_empty() {
        return Err(Error::EmptyInput(root.to_path_buf()));
    }
    make_dirs(output_dir, &[SHARP_DIR, BLURRED_DIR])?;

    let mut slots = Vec::new();
    let mut skipped = Vec::new();
    for seq in &sequences {
        let name = file_name(seq);
        let frames = list_frames(seq)?;
        if frames.len() < config.max_frames {
            skipped.push(SkippedInput {
                path: name,
                reason: Error::InsufficientFrames {
                    required: config.max_frames,
                    available: frames.len(),
                }
                .to_string(),
            });
            continue;
        }
        let frames = std::sync::Arc::new(frames);
        let last = frames.len() - config.max_frames;
        let step = config.stride.unwrap_or(usize::MAX);
        let mut start = 0;
        loop {
            slots.push(Slot {
                sequence: name.clone(),
                frames: frames.clone(),
                start,
            });
            match start.checked_add(step) {
                Some(next) if next <= last => start = next,
                _ => break,
            }
        }
    }

    let pool = thread_pool(config.workers)?;
    let outcomes: Vec<ItemOutcome> = pool.install(|| {
        slots
            .par_iter()
            .enumerate()
            .map(|(i, slot)| average_slot(i as u64, slot, output_dir, config))
            .collect()
    });
    let mut records = Vec::new();
    for outcome in outcomes {
        match outcome? {
            Outcome::Pairs(recs) => records.extend(recs),
            Outcome::Skipped(skip) | Outcome::Undecodable(skip) => skipped.push(skip),
        }
    }

    let manifest = Manifest {
        header: ManifestHeader {
            toolkit_version: TOOLKIT_VERSION.into(),
            rng_algorithm: RNG_ALGORITHM.into(),
            master_seed: config.master_seed,
            config: serde_json::json!({
                "command": "framesim-dataset",
                "frames_root": root.to_string_lossy(),
                "settings": config,
            }),
            synth_real_ratio: None,
            skipped,
        },
        records,
    };
    manifest.write(output_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

fn average_slot(item: u64, slot: &Slot, out: &Path, config: &FrameSimConfig) -> ItemOutcome {
    let item_seed = derive_item_seed(config.master_seed, item);
    let mut rng = SeededRng::new(item_seed);
    let local = sample_window_range(config.max_frames, &mut rng, config.min_frames, config.max_frames)?;
    let mut sel = local;
    sel.offset += slot.start;

    let window = match load_window(&slot.frames, sel, config.gamma) {
        Ok(w) => w,
        Err(e) => {
            return Ok(Outcome::Skipped(SkippedInput {
                path: format!("{}[{}..{}]", slot.sequence, sel.offset, sel.offset + sel.len),
                reason: e.to_string(),
            }))
        }
    };
    let (blurred, sharp) = simulate_frame_blur(&window);

    let pair_id = format!("fa-{item:06}");
    let sharp_rel = format!("{SHARP_DIR}/{pair_id}.png");
    let blurred_rel = format!("{BLURRED_DIR}/{pair_id}.png");
    save(&sharp, &out.join(&sharp_rel))?;
    save(&blurred, &out.join(&blurred_rel))?;

    Ok(Outcome::Pairs(vec![PairRecord {
        pair_id,
        sharp_path: sharp_rel,
        blurred_path: blurred_rel,
        kernel_path: None,
        master_seed: config.master_seed,
        item_seed,
        params: None,
        noise_sigma: 0.0,
        crop: None,
        source: PairSource::FrameAverage,
        downscale: 1,
        source_image: None,
        source_size: Some([sharp.width(), sharp.height()]),
        window: Some(WindowInfo {
            sequence: slot.sequence.clone(),
            offset: sel.offset,
            frames: sel.len,
            middle_frame: file_name(&slot.frames[sel.offset + window.middle_index()]),
        }),
    }]))
}
