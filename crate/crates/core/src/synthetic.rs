//! Piecewise smooth test images.

use crate::calculus::{Grid, ScalarImage};

/// Phantom with a ramp background, a bright rectangle, a dark disc and a
/// thin bar. Values lie in `[0, 1]`.
pub fn phantom(grid: Grid) -> ScalarImage {
    let (hh, ww) = (grid.height as f64, grid.width as f64);
    ScalarImage::from_fn(grid, |r, c| {
        let y = (r as f64 + 0.5) / hh;
        let x = (c as f64 + 0.5) / ww;
        let mut v = 0.2 + 0.2 * x;
        if (0.15..0.45).contains(&x) && (0.2..0.7).contains(&y) {
            v = 0.85;
        }
        if (x - 0.68).powi(2) + (y - 0.4).powi(2) < 0.18 * 0.18 {
            v = 0.1;
        }
        if (0.55..0.9).contains(&x) && (0.78..0.84).contains(&y) {
            v = 0.7;
        }
        v
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phantom_range_and_levels() {
        let img = phantom(Grid::new(64, 64).unwrap());
        assert!(img.data().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(img.get(28, 19), 0.85);
        assert_eq!(img.get(25, 43), 0.1);
    }
}
