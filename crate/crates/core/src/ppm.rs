//! Binary PPM (P6) and PGM (P5) with maxval 255.

use crate::error::{Error, Result};
use crate::image::Image;
use std::path::Path;

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    /// Returns the value and the offset where its digits start.
    fn read_uint(&mut self, what: &str) -> Result<(usize, usize)> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::parse(start, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .map(|v| (v, start))
            .ok_or_else(|| Error::parse(start, format!("{what} out of range")))
    }
}

/// Decodes a binary P6 or P5 file with maxval 255.
pub fn load_ppm(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(Error::parse(0, "missing P5/P6 magic"));
    }
    let channels = match bytes[1] {
        b'6' => 3,
        b'5' => 1,
        _ => return Err(Error::parse(1, "only binary P5 and P6 are supported")),
    };
    let mut rd = HeaderReader { bytes, pos: 2 };
    let (width, _) = rd.read_uint("width")?;
    let (height, _) = rd.read_uint("height")?;
    let (maxval, maxval_pos) = rd.read_uint("maxval")?;
    if maxval != 255 {
        return Err(Error::parse(maxval_pos, format!("unsupported maxval {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(Error::parse(2, "zero image dimension"));
    }
    match bytes.get(rd.pos) {
        Some(b) if b.is_ascii_whitespace() => rd.pos += 1,
        _ => return Err(Error::parse(rd.pos, "expected single whitespace after maxval")),
    }
    let need = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| Error::parse(2, "dimensions overflow"))?;
    let payload = &bytes[rd.pos..];
    if payload.len() < need {
        return Err(Error::parse(
            bytes.len(),
            format!("truncated payload: need {need} bytes, have {}", payload.len()),
        ));
    }
    let data = payload[..need].iter().map(|&b| b as f64 / 255.0).collect();
    Image::from_vec(height, width, channels, data)
}

/// Encodes as P6 (color) or P5 (gray) with a canonical header.
pub fn save_ppm(img: &Image) -> Vec<u8> {
    let magic = if img.channels() == 3 { "P6" } else { "P5" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.data().iter().map(|&v| quantize_u8(v)));
    out
}

#[inline]
pub fn quantize_u8(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

pub fn read_ppm_file(path: &Path) -> Result<Image> {
    load_ppm(&std::fs::read(path)?)
}

pub fn write_ppm_file(path: &Path, img: &Image) -> Result<()> {
    std::fs::write(path, save_ppm(img))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gray_two_pixels() {
        let mut b = b"P5 2 1 255\n".to_vec();
        b.extend([0u8, 255]);
        let im = load_ppm(&b).unwrap();
        assert_eq!(im.dims(), (1, 2, 1));
        assert_eq!(im.data(), &[0.0, 1.0]);
    }

    #[test]
    fn mid_gray_color() {
        let mut b = b"P6\n3 1\n255\n".to_vec();
        b.extend([128u8; 9]);
        let im = load_ppm(&b).unwrap();
        for &v in im.data() {
            assert!((v - 0.50196).abs() < 1e-5);
        }
    }

    #[test]
    fn save_extremes() {
        let z = save_ppm(&Image::zeros(1, 1, 1));
        assert_eq!(z, b"P5\n1 1\n255\n\0");
        let o = save_ppm(&Image::filled(1, 1, 3, 1.0));
        assert_eq!(&o[o.len() - 3..], &[255, 255, 255]);
        let h = save_ppm(&Image::filled(1, 1, 1, 0.5));
        assert_eq!(*h.last().unwrap(), 128);
    }

    #[test]
    fn comments_in_header() {
        let mut b = b"P5\n# made by hand\n1 1\n# max\n255\n".to_vec();
        b.push(51);
        assert!((load_ppm(&b).unwrap().data()[0] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn errors_name_offsets() {
        match load_ppm(b"P3 1 1 255\n") {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 1),
            other => panic!("{other:?}"),
        }
        match load_ppm(b"P5 1 1 65535\n\0\0") {
            Err(Error::Parse { offset, reason }) => {
                assert_eq!(offset, 7);
                assert!(reason.contains("maxval"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(load_ppm(b"P6 2 2 255\n\0\0\0"), Err(Error::Parse { .. })));
        assert!(matches!(load_ppm(b"P6 x 2 255\n"), Err(Error::Parse { offset: 3, .. })));
        assert!(load_ppm(b"").is_err());
    }

    proptest! {
        #[test]
        fn canonical_files_roundtrip_bit_exact(
            w in 1usize..9, h in 1usize..9, color in any::<bool>(), seed in any::<u64>()
        ) {
            let c = if color { 3 } else { 1 };
            let magic = if color { "P6" } else { "P5" };
            let mut bytes = format!("{magic}\n{w} {h}\n255\n").into_bytes();
            let mut s = seed;
            for _ in 0..w * h * c {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                bytes.push((s >> 56) as u8);
            }
            let im = load_ppm(&bytes).unwrap();
            prop_assert_eq!(save_ppm(&im), bytes);
        }
    }
}
