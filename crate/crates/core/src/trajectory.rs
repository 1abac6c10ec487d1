//! Random camera-shake trajectories.
//!
//! A trajectory is a complex-valued sample path: the real part is the
//! horizontal and the imaginary part the vertical displacement in pixels.
//! Each step has the same length, so the whole path is exactly
//! `max_length` long. The velocity is perturbed at every step by three
//! forces: rare impulsive reversals ("big shakes"), Gaussian jitter, and a
//! centripetal inertia term that pulls the path back toward the origin.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

pub const DEFAULT_ITERATIONS: usize = 2000;
pub const DEFAULT_MAX_LENGTH: f64 = 60.0;
pub const DEFAULT_IMPULSE_PROB: f64 = 0.001;

/// Upper bounds of the uniform ranges used by [`sample_params`].
pub const INERTIA_MAX: f64 = 0.7;
pub const BIG_SHAKE_PROB_MAX: f64 = 0.2;
pub const GAUSSIAN_SHAKE_PROB_MAX: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryParams {
    /// Number of samples on the path.
    pub iterations: usize,
    /// Total path length in pixels.
    pub max_length: f64,
    pub impulse_prob: f64,
    pub inertia: f64,
    pub big_shake_prob: f64,
    pub gaussian_shake_prob: f64,
    /// Initial direction of motion, radians.
    pub initial_angle: f64,
}

impl TrajectoryParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                bad(format!("{name} must lie in [0, 1], got {p}"))
            }
        };
        if self.iterations < 1 {
            return bad("iterations must be at least 1".into());
        }
        if !(self.max_length >= 0.0 && self.max_length.is_finite()) {
            return bad(format!("max_length must be finite and >= 0, got {}", self.max_length));
        }
        prob("impulse_prob", self.impulse_prob)?;
        prob("big_shake_prob", self.big_shake_prob)?;
        prob("gaussian_shake_prob", self.gaussian_shake_prob)?;
        if !(0.0..1.0).contains(&self.inertia) {
            return bad(format!("inertia must lie in [0, 1), got {}", self.inertia));
        }
        if !self.initial_angle.is_finite() {
            return bad("initial_angle must be finite".into());
        }
        Ok(())
    }

    /// Length of a single step, `max_length / (iterations - 1)`.
    pub fn step_length(&self) -> f64 {
        if self.iterations < 2 {
            0.0
        } else {
            self.max_length / (self.iterations - 1) as f64
        }
    }
}

/// Explicit values that pin parameters which would otherwise be sampled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamOverrides {
    pub iterations: Option<usize>,
    pub max_length: Option<f64>,
    pub impulse_prob: Option<f64>,
    pub inertia: Option<f64>,
    pub big_shake_prob: Option<f64>,
    pub gaussian_shake_prob: Option<f64>,
    pub initial_angle: Option<f64>,
}

/// Draw the per-kernel parameters: the fixed defaults for length, sample
/// count and impulse probability, the rest uniform over their ranges.
pub fn sample_params(rng: &mut SeededRng) -> TrajectoryParams {
    sample_params_with(rng, &ParamOverrides::default())
}

/// Like [`sample_params`] but with some values pinned.
///
/// All four random draws are always consumed, in a fixed order, so pinning
/// one parameter does not change the values drawn for the others.
pub fn sample_params_with(rng: &mut SeededRng, overrides: &ParamOverrides) -> TrajectoryParams {
    let inertia = rng.uniform_between(0.0, INERTIA_MAX);
    let big_shake_prob = rng.uniform_between(0.0, BIG_SHAKE_PROB_MAX);
    let gaussian_shake_prob = rng.uniform_between(0.0, GAUSSIAN_SHAKE_PROB_MAX);
    let initial_angle = rng.uniform_between(0.0, TAU);
    TrajectoryParams {
        iterations: overrides.iterations.unwrap_or(DEFAULT_ITERATIONS),
        max_length: overrides.max_length.unwrap_or(DEFAULT_MAX_LENGTH),
        impulse_prob: overrides.impulse_prob.unwrap_or(DEFAULT_IMPULSE_PROB),
        inertia: overrides.inertia.unwrap_or(inertia),
        big_shake_prob: overrides.big_shake_prob.unwrap_or(big_shake_prob),
        gaussian_shake_prob: overrides.gaussian_shake_prob.unwrap_or(gaussian_shake_prob),
        initial_angle: overrides.initial_angle.unwrap_or(initial_angle),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Complex64>,
    pub params: TrajectoryParams,
    /// Seed of the stream the path was drawn from.
    pub seed: u64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sum of step lengths.
    pub fn path_length(&self) -> f64 {
        self.samples.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    /// Largest distance of any sample from the origin.
    pub fn max_radius(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `(min_re, min_im, max_re, max_im)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        self.samples.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(x0, y0, x1, y1), z| (x0.min(z.re), y0.min(z.im), x1.max(z.re), y1.max(z.im)),
        )
    }

    /// Plain-text dump, one `re im` pair per line.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.samples.len() * 40);
        for z in &self.samples {
            let _ = writeln!(out, "{:?} {:?}", z.re, z.im);
        }
        out
    }

    pub fn write_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(self.to_text().as_bytes())?;
        f.flush()?;
        Ok(())
    }
}

/// Run the Markov process for `params.iterations` samples.
///
/// Per step, with `step = max_length / (iterations - 1)`:
///
/// 1. with probability `big_shake_prob * impulse_prob` the velocity gets an
///    impulse `2 v exp(i (pi + u - 0.5))`, `u ~ U(0, 1)`, i.e. a jittered
///    reversal;
/// 2. `dv = impulse + impulse_prob * (gaussian_shake_prob * (n1 + i n2) - inertia * x[t]) * step`;
/// 3. `v = (v + dv) / |v + dv| * step` and `x[t + 1] = x[t] + v`.
///
/// Zero length or a single sample gives the degenerate all-origin path.
pub fn generate_trajectory(params: &TrajectoryParams, rng: &mut SeededRng) -> Result<Trajectory> {
    params.validate()?;
    let m = params.iterations;
    let mut samples = vec![Complex64::new(0.0, 0.0); m];
    let step = params.step_length();
    if m < 2 || step == 0.0 {
        return Ok(Trajectory {
            samples,
            params: *params,
            seed: rng.seed(),
        });
    }

    let impulse_threshold = params.big_shake_prob * params.impulse_prob;
    let mut v = Complex64::from_polar(step, params.initial_angle);
    for t in 0..m - 1 {
        let next_dir = if rng.uniform() < impulse_threshold {
            let jitter = rng.uniform() - 0.5;
            2.0 * v * Complex64::from_polar(1.0, PI + jitter)
        } else {
            Complex64::new(0.0, 0.0)
        };
        let (n1, n2) = rng.normal_pair();
        let shake = params.gaussian_shake_prob * Complex64::new(n1, n2);
        let dv = next_dir + params.impulse_prob * (shake - params.inertia * samples[t]) * step;
        v += dv;
        let speed = v.norm();
        v = if speed > 0.0 && speed.is_finite() {
            v * (step / speed)
        } else {
            Complex64::from_polar(step, rng.uniform() * TAU)
        };
        samples[t + 1] = samples[t] + v;
    }

    Ok(Trajectory {
        samples,
        params: *params,
        seed: rng.seed(),
    })
}
