//! File formats: PGM images, lossless float grids, key-value configs and
//! CSV metrics.

pub mod config;
pub mod grid;
pub mod metrics;
pub mod pgm;

pub use config::{load_phi_field, save_phi_field, KeyValues, ParamSource, PhiSpec};
pub use grid::{decode_grid, encode_grid, load_field, load_grid, save_field, save_grid};
pub use metrics::{write_flow_csv, write_metrics_csv, METRICS_HEADER};
pub use pgm::{decode_pgm, encode_pgm, load_pgm, save_pgm};

use std::path::Path;

use crate::calculus::ScalarImage;
use crate::error::Result;

/// Loads an image by extension: `.grid` uses the float format, anything
/// else is read as PGM.
pub fn load_image(path: impl AsRef<Path>) -> Result<ScalarImage> {
    let path = path.as_ref();
    if is_grid(path) {
        load_grid(path)
    } else {
        load_pgm(path)
    }
}

/// Saves an image by extension, like [`load_image`].
pub fn save_image(img: &ScalarImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if is_grid(path) {
        save_grid(img, path)
    } else {
        save_pgm(img, path)
    }
}

fn is_grid(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "grid")
}
