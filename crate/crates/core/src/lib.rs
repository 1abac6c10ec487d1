//! Synthetic camera-shake blur.
//!
//! * [`trajectory`]: random-walk camera paths with impulsive, Gaussian and
//!   inertial perturbations.
//! * [`kernel`]: bilinear rasterization of a path into a unit-sum PSF and the
//!   KERN1 text format.
//! * [`convolve`]: replicate-boundary convolution (direct and FFT) plus
//!   additive noise.
//! * [`framesim`]: blur by gamma-space averaging of high-frame-rate frames.
//! * [`metrics`]: PSNR and SSIM.
//! * [`pipeline`] and [`manifest`]: reproducible paired datasets.

pub mod convolve;
pub mod error;
pub mod framesim;
pub mod image;
pub mod kernel;
pub mod manifest;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod trajectory;

pub use convolve::{apply_blur, convolve_fast, convolve_fft, convolve_spatial, NoiseSpec};
pub use error::{Error, Result};
pub use framesim::{sample_window, sample_window_range, simulate_frame_blur, FrameWindow, WindowSelection};
pub use image::ImageBuffer;
pub use kernel::{auto_canvas, kernel_preview, rasterize, read_kernel, write_kernel, BlurKernel};
pub use manifest::{Crop, Manifest, PairRecord, PairSource};
pub use metrics::{evaluate_pairs, psnr, ssim, MetricReport};
pub use pipeline::{build_dataset, build_framesim_dataset, derive_item_seed, DatasetConfig, FrameSimConfig};
pub use rng::SeededRng;
pub use trajectory::{generate_trajectory, sample_params, ParamOverrides, Trajectory, TrajectoryParams};
