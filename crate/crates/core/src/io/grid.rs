//! Lossless text format for real-valued grids.
//!
//! ```text
//! ROFPHI-GRID 1
//! <height> <width> <h>
//! <value>
//! ...
//! ```
//!
//! Values are written row-major, one per line, in the shortest decimal form
//! that parses back to the same `f64`. Blank lines and `#` comments are
//! ignored on read.

use std::path::Path;

use crate::calculus::{Grid, ScalarImage, VectorField};
use crate::error::{Error, Result};

pub const MAGIC: &str = "ROFPHI-GRID";
pub const VERSION: u32 = 1;

/// Serialises an image.
pub fn encode_grid(img: &ScalarImage) -> String {
    let g = img.grid();
    let mut out = String::with_capacity(24 * g.len() + 64);
    out.push_str(&format!(
        "{MAGIC} {VERSION}\n{} {} {:e}\n",
        g.height, g.width, g.h
    ));
    for v in img.data() {
        out.push_str(&format!("{v:e}\n"));
    }
    out
}

struct Tokens<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn next(&mut self) -> Option<(&'a str, usize)> {
        let bytes = self.text.as_bytes();
        loop {
            while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < bytes.len() && bytes[self.pos] == b'#' {
                while self.pos < bytes.len() && bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        if self.pos >= bytes.len() {
            return None;
        }
        let start = self.pos;
        while self.pos < bytes.len()
            && !bytes[self.pos].is_ascii_whitespace()
            && bytes[self.pos] != b'#'
        {
            self.pos += 1;
        }
        Some((&self.text[start..self.pos], start))
    }

    fn expect<T: std::str::FromStr>(&mut self, what: &str) -> Result<(T, usize)> {
        let (tok, at) = self.next().ok_or_else(|| {
            Error::parse(
                self.text.len(),
                format!("unexpected end of file, expected {what}"),
            )
        })?;
        let v = tok
            .parse::<T>()
            .map_err(|_| Error::parse(at, format!("invalid {what} '{tok}'")))?;
        Ok((v, at))
    }
}

/// Parses an image written by [`encode_grid`].
pub fn decode_grid(text: &str) -> Result<ScalarImage> {
    let mut toks = Tokens { text, pos: 0 };
    let (magic, at) = toks
        .next()
        .ok_or_else(|| Error::parse(0, "empty file, expected ROFPHI-GRID header"))?;
    if magic != MAGIC {
        return Err(Error::parse(
            at,
            format!("expected '{MAGIC}', found '{magic}'"),
        ));
    }
    let (version, at) = toks.expect::<u32>("format version")?;
    if version != VERSION {
        return Err(Error::parse(
            at,
            format!("unsupported format version {version}"),
        ));
    }
    let (height, at) = toks.expect::<usize>("height")?;
    let (width, _) = toks.expect::<usize>("width")?;
    let (h, h_at) = toks.expect::<f64>("spacing")?;
    let n = height
        .checked_mul(width)
        .filter(|&n| n <= super::pgm::MAX_PIXELS)
        .ok_or_else(|| Error::parse(at, format!("dimensions {height}x{width} too large")))?;
    let grid =
        Grid::with_spacing(height, width, h).map_err(|e| Error::parse(h_at, e.to_string()))?;
    let mut data = Vec::with_capacity(n);
    for k in 0..n {
        let (v, at) = toks.expect::<f64>("value")?;
        if !v.is_finite() {
            return Err(Error::parse(at, format!("value {k} is not finite")));
        }
        data.push(v);
    }
    if let Some((tok, at)) = toks.next() {
        return Err(Error::parse(
            at,
            format!("trailing data '{tok}' after {n} values"),
        ));
    }
    ScalarImage::from_vec(grid, data)
}

pub fn load_grid(path: impl AsRef<Path>) -> Result<ScalarImage> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_grid(&text)
}

pub fn save_grid(img: &ScalarImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_grid(img)).map_err(|e| Error::io(path, e))
}

/// Writes the two components of a field as `<stem>_x.grid` and `<stem>_y.grid`.
pub fn save_field(xi: &VectorField, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
    let dir = dir.as_ref();
    let g = xi.grid();
    save_grid(
        &ScalarImage::from_vec(g, xi.x().to_vec())?,
        dir.join(format!("{stem}_x.grid")),
    )?;
    save_grid(
        &ScalarImage::from_vec(g, xi.y().to_vec())?,
        dir.join(format!("{stem}_y.grid")),
    )
}

/// Reads a field written by [`save_field`]. Boundary flux is kept as stored.
pub fn load_field(dir: impl AsRef<Path>, stem: &str) -> Result<VectorField> {
    let dir = dir.as_ref();
    let x = load_grid(dir.join(format!("{stem}_x.grid")))?;
    let y = load_grid(dir.join(format!("{stem}_y.grid")))?;
    x.grid().ensure_same(&y.grid(), "field components")?;
    VectorField::from_components(x.grid(), x.into_vec(), y.into_vec())
}
