//! Shared inputs for the benchmarks.

use blurforge_core::{generate_trajectory, rasterize, sample_params, BlurKernel, ImageBuffer, SeededRng};

/// Smooth RGB test pattern with some high-frequency texture.
pub fn test_image(width: usize, height: usize) -> ImageBuffer {
    ImageBuffer::from_fn(width, height, 3, |c, x, y| {
        let fx = x as f64 / width as f64;
        let fy = y as f64 / height as f64;
        let checker = if (x / 8 + y / 8) % 2 == 0 { 0.15 } else { 0.0 };
        (0.2 + 0.3 * fx + 0.2 * fy + 0.1 * c as f64 + checker).min(1.0)
    })
    .expect("valid size")
}

/// Default-parameter kernel for `seed`.
pub fn random_kernel(seed: u64) -> BlurKernel {
    let mut rng = SeededRng::new(seed);
    let params = sample_params(&mut rng);
    let traj = generate_trajectory(&params, &mut rng).expect("default params are valid");
    rasterize(&traj, None).expect("auto canvas fits")
}

/// Box kernel of the given odd side, to pin the FFT size.
pub fn box_kernel(side: usize) -> BlurKernel {
    BlurKernel::uniform(side, side).expect("odd side")
}
