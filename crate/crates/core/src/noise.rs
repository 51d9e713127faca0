//! Seeded Gaussian noise.
//!
//! Uniforms come from SplitMix64 with its state set to the seed. Pairs of
//! uniforms are turned into pairs of normals by the Box–Muller transform.
//! The transcendentals are the pure-Rust `libm` routines, so output is
//! bit-identical across platforms.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::calculus::ScalarImage;
use crate::error::{Error, Result};

/// Standard normal generator.
#[derive(Clone, Debug)]
pub struct GaussianStream {
    rng: SplitMix64,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        GaussianStream {
            rng: SplitMix64::from_seed(seed.to_le_bytes()),
            spare: None,
        }
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 1 - U lies in (0, 1], so the logarithm is finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * libm::sin(theta));
        r * libm::cos(theta)
    }
}

/// Returns `img + sigma * N(0, 1)` per pixel, drawn in row-major order.
pub fn add_noise(img: &ScalarImage, sigma: f64, seed: u64) -> Result<ScalarImage> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise sigma must be >= 0, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let mut stream = GaussianStream::new(seed);
    let mut out = img.clone();
    for v in out.data_mut() {
        *v += sigma * stream.next_normal();
    }
    Ok(out)
}
