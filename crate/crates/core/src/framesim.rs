//! Blur from high-frame-rate video: average a short window of sharp frames
//! in linear light and pair the result with the window's middle frame.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{list_images, ImageBuffer};
use crate::rng::SeededRng;

pub const DEFAULT_GAMMA: f64 = 2.2;
pub const DEFAULT_MIN_FRAMES: usize = 5;
pub const DEFAULT_MAX_FRAMES: usize = 25;

#[derive(Debug, Clone)]
pub struct FrameWindow {
    frames: Vec<ImageBuffer>,
    gamma: f64,
}

impl FrameWindow {
    pub fn new(frames: Vec<ImageBuffer>, gamma: f64) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::InvalidParams("frame window is empty".into()))?;
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParams(format!("gamma must be > 0, got {gamma}")));
        }
        if let Some(bad) = frames.iter().find(|f| !f.same_shape(first)) {
            return Err(Error::dims(first.shape(), bad.shape()));
        }
        Ok(Self { frames, gamma })
    }

    pub fn frames(&self) -> &[ImageBuffer] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `n / 2`; even windows take the earlier of the two middle frames.
    pub fn middle_index(&self) -> usize {
        self.frames.len() / 2
    }
}

/// Per sample, `((1/n) sum frame_i^gamma)^(1/gamma)`, paired with the middle frame.
///
/// Returns `(blurred, sharp)`.
pub fn simulate_frame_blur(window: &FrameWindow) -> (ImageBuffer, ImageBuffer) {
    let frames = window.frames();
    let first = &frames[0];
    let gamma = window.gamma();
    let n = frames.len() as f64;

    let mut acc = vec![0.0; first.data().len()];
    for frame in frames {
        for (a, v) in acc.iter_mut().zip(frame.data()) {
            *a += v.powf(gamma);
        }
    }
    let inv = 1.0 / gamma;
    let data = acc.into_iter().map(|s| (s / n).powf(inv)).collect();
    let blurred =
        ImageBuffer::new(first.width(), first.height(), first.channels(), data).expect("shape preserved");
    (blurred, frames[window.middle_index()].clone())
}

/// A contiguous run of frames inside a longer sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSelection {
    pub offset: usize,
    pub len: usize,
}

impl WindowSelection {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}

/// Draw `n ~ U{n_min..=n_max}` and then a uniform offset with
/// `offset + n <= available`.
pub fn sample_window_range(
    available: usize,
    rng: &mut SeededRng,
    n_min: usize,
    n_max: usize,
) -> Result<WindowSelection> {
    if n_min == 0 || n_min > n_max {
        return Err(Error::InvalidParams(format!(
            "frame count range {n_min}..={n_max} is empty or starts at zero"
        )));
    }
    if available < n_max {
        return Err(Error::InsufficientFrames {
            required: n_max,
            available,
        });
    }
    let len = rng.int_inclusive(n_min as u64, n_max as u64) as usize;
    let offset = rng.int_inclusive(0, (available - len) as u64) as usize;
    Ok(WindowSelection { offset, len })
}

/// [`sample_window_range`] over in-memory frames.
pub fn sample_window(
    frames: &[ImageBuffer],
    rng: &mut SeededRng,
    n_min: usize,
    n_max: usize,
    gamma: f64,
) -> Result<FrameWindow> {
    let sel = sample_window_range(frames.len(), rng, n_min, n_max)?;
    FrameWindow::new(frames[sel.range()].to_vec(), gamma)
}

/// Frame files of a sequence directory in lexicographic order.
pub fn list_frames(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    list_images(dir)
}

/// Decode the selected frames and build a window.
pub fn load_window(paths: &[PathBuf], sel: WindowSelection, gamma: f64) -> Result<FrameWindow> {
    let frames = paths[sel.range()]
        .iter()
        .map(ImageBuffer::load)
        .collect::<Result<Vec<_>>>()?;
    FrameWindow::new(frames, gamma)
}
