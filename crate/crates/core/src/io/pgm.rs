//! Grayscale PGM (`P2` ASCII and `P5` binary) reading and `P5` writing.
//!
//! Samples are normalised to `[0, 1]` by dividing by `maxval` on load. On
//! save values are clamped to `[0, 1]`, scaled to 255 and rounded half to
//! even.

use std::path::Path;

use crate::calculus::{Grid, ScalarImage};
use crate::error::{Error, Result};

/// Upper bound on the pixel count accepted from a header.
pub const MAX_PIXELS: usize = 1 << 28;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Encoding {
    Ascii,
    Binary,
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.data.len() {
            match self.data[self.pos] {
                b'#' => {
                    while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    /// Next unsigned decimal token and its starting offset.
    fn number(&mut self, what: &str) -> Result<(u64, usize)> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.data.len() && self.data[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(if start >= self.data.len() {
                Error::parse(start, format!("unexpected end of file, expected {what}"))
            } else {
                Error::parse(start, format!("expected {what}"))
            });
        }
        if self.pos < self.data.len()
            && !self.data[self.pos].is_ascii_whitespace()
            && self.data[self.pos] != b'#'
        {
            return Err(Error::parse(self.pos, format!("malformed {what}")));
        }
        let text = std::str::from_utf8(&self.data[start..self.pos]).expect("ascii digits");
        let value = text
            .parse::<u64>()
            .map_err(|_| Error::parse(start, format!("{what} out of range")))?;
        Ok((value, start))
    }
}

/// Decodes a PGM byte stream.
pub fn decode_pgm(data: &[u8]) -> Result<ScalarImage> {
    if data.len() < 2 {
        return Err(Error::parse(
            data.len(),
            "unexpected end of file, expected magic number",
        ));
    }
    let encoding = match &data[..2] {
        b"P2" => Encoding::Ascii,
        b"P5" => Encoding::Binary,
        _ => return Err(Error::parse(0, "expected magic number P2 or P5")),
    };
    let mut cur = Cursor { data, pos: 2 };
    if cur.pos < data.len() && !data[cur.pos].is_ascii_whitespace() && data[cur.pos] != b'#' {
        return Err(Error::parse(
            cur.pos,
            "expected whitespace after magic number",
        ));
    }
    let (width, w_at) = cur.number("width")?;
    let (height, h_at) = cur.number("height")?;
    let (maxval, m_at) = cur.number("maxval")?;
    if width == 0 {
        return Err(Error::parse(w_at, "width must be positive"));
    }
    if height == 0 {
        return Err(Error::parse(h_at, "height must be positive"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::parse(
            m_at,
            format!("maxval {maxval} outside 1..=65535"),
        ));
    }
    let pixels = (width as usize)
        .checked_mul(height as usize)
        .filter(|&n| n <= MAX_PIXELS)
        .ok_or_else(|| Error::parse(w_at, format!("dimensions {width}x{height} too large")))?;
    let grid = Grid::new(height as usize, width as usize)
        .map_err(|e| Error::parse(w_at, e.to_string()))?;
    let scale = 1.0 / maxval as f64;

    let mut values = Vec::with_capacity(pixels);
    match encoding {
        Encoding::Ascii => {
            for _ in 0..pixels {
                let (v, at) = cur.number("sample")?;
                if v > maxval {
                    return Err(Error::parse(
                        at,
                        format!("sample {v} exceeds maxval {maxval}"),
                    ));
                }
                values.push(v as f64 * scale);
            }
        }
        Encoding::Binary => {
            // Exactly one whitespace byte separates the header from the payload.
            if cur.pos >= data.len() {
                return Err(Error::parse(cur.pos, "unexpected end of file after header"));
            }
            if !data[cur.pos].is_ascii_whitespace() {
                return Err(Error::parse(cur.pos, "expected whitespace after maxval"));
            }
            let start = cur.pos + 1;
            let bytes_per = if maxval > 255 { 2 } else { 1 };
            let needed = pixels * bytes_per;
            let available = data.len() - start;
            if available < needed {
                return Err(Error::parse(
                    data.len(),
                    format!("truncated payload: expected {needed} bytes, found {available}"),
                ));
            }
            let payload = &data[start..start + needed];
            for (k, chunk) in payload.chunks_exact(bytes_per).enumerate() {
                let v = if bytes_per == 2 {
                    u16::from_be_bytes([chunk[0], chunk[1]]) as u64
                } else {
                    chunk[0] as u64
                };
                if v > maxval {
                    return Err(Error::parse(
                        start + k * bytes_per,
                        format!("sample {v} exceeds maxval {maxval}"),
                    ));
                }
                values.push(v as f64 * scale);
            }
        }
    }
    ScalarImage::from_vec(grid, values)
}

/// Encodes an image as 8-bit binary PGM.
pub fn encode_pgm(img: &ScalarImage) -> Vec<u8> {
    let g = img.grid();
    let mut out = format!("P5\n{} {}\n255\n", g.width, g.height).into_bytes();
    out.extend(img.data().iter().map(|&v| quantize(v)));
    out
}

/// Clamp to `[0, 1]`, scale to 255, round half to even.
#[inline]
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round_ties_even() as u8
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<ScalarImage> {
    let path = path.as_ref();
    let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&data)
}

pub fn save_pgm(img: &ScalarImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn offset(err: Error) -> usize {
        match err {
            Error::Parse { offset, .. } => offset,
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn ascii_two_by_two() {
        let img = decode_pgm(b"P2 2 2 255\n0 255\n255 0\n").unwrap();
        assert_eq!(img.grid().height, 2);
        assert_eq!(img.data(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn comments_are_skipped() {
        let img = decode_pgm(b"P2\n# made by hand\n3 1 # width height\n4\n0 2 4\n").unwrap();
        assert_eq!(img.data(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn binary_round_trip_up_to_quantisation() {
        let g = Grid::new(3, 5).unwrap();
        let img = ScalarImage::from_fn(g, |r, c| (r * 5 + c) as f64 / 14.0);
        let back = decode_pgm(&encode_pgm(&img)).unwrap();
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-15);
        }
        // Already-quantised values survive exactly.
        assert_eq!(decode_pgm(&encode_pgm(&back)).unwrap(), back);
    }

    #[test]
    fn sixteen_bit_binary() {
        let mut data = b"P5 2 1 1000\n".to_vec();
        data.extend_from_slice(&[0x01, 0xF4, 0x03, 0xE8]);
        let img = decode_pgm(&data).unwrap();
        assert_eq!(img.data(), &[0.5, 1.0]);
    }

    #[test]
    fn quantisation_rounds_half_to_even() {
        assert_eq!(quantize(-0.3), 0);
        assert_eq!(quantize(1.7), 255);
        assert_eq!(quantize(0.5), 128); // 127.5 -> 128
        assert_eq!(quantize(126.5 / 255.0), 126);
    }

    #[test]
    fn truncated_payload_reports_missing_byte() {
        let mut data = b"P5 4 4 255\n".to_vec();
        let header = data.len();
        data.extend_from_slice(&[7u8; 10]);
        let err = decode_pgm(&data).unwrap_err();
        assert_eq!(offset(err), header + 10);
    }

    #[test]
    fn malformed_headers() {
        assert_eq!(offset(decode_pgm(b"P6 1 1 255\n\0").unwrap_err()), 0);
        assert_eq!(offset(decode_pgm(b"P2 2 x 255\n").unwrap_err()), 5);
        assert_eq!(offset(decode_pgm(b"P2 2 2 70000\n").unwrap_err()), 7);
        assert_eq!(
            offset(decode_pgm(b"P2 2 2 255\n0 1 300 2").unwrap_err()),
            15
        );
        assert_eq!(offset(decode_pgm(b"P2 2 2 255\n0 1 3").unwrap_err()), 16);
        assert!(decode_pgm(b"P5 99999999 99999999 255\n").is_err());
        assert!(decode_pgm(b"P2 1 1 255\n0").is_err());
    }
}
