//! Seeded random data for unit tests.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::calculus::{Grid, ScalarImage, VectorField};

pub(crate) struct TestRng(SplitMix64);

impl TestRng {
    pub(crate) fn new(seed: u64) -> Self {
        TestRng(SplitMix64::seed_from_u64(seed))
    }

    /// Uniform draw in `[0, 1)`.
    pub(crate) fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub(crate) fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }
}

pub(crate) fn random_image(grid: Grid, rng: &mut TestRng, amplitude: f64) -> ScalarImage {
    ScalarImage::from_fn(grid, |_, _| rng.range(-amplitude, amplitude))
}

/// Random field with zero outward flux.
pub(crate) fn random_field(grid: Grid, rng: &mut TestRng, amplitude: f64) -> VectorField {
    let x = (0..grid.len())
        .map(|_| rng.range(-amplitude, amplitude))
        .collect();
    let y = (0..grid.len())
        .map(|_| rng.range(-amplitude, amplitude))
        .collect();
    VectorField::from_components_zero_trace(grid, x, y).unwrap()
}
