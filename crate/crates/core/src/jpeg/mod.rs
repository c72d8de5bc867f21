//! Baseline sequential JPEG (JFIF) codec.
//!
//! The encoder emits YCbCr 4:2:0 for color images and a single component for
//! gray images, with the Annex K quantization and Huffman tables. The decoder
//! accepts any baseline Huffman stream with sampling factors 1 or 2.

mod decoder;
mod encoder;
mod tables;

use crate::error::{Error, Result};
use crate::image::Image;

pub use decoder::jpeg_decompress;
pub use encoder::jpeg_compress;

/// A complete JFIF byte stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JpegBlob(Vec<u8>);

impl JpegBlob {
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        JpegBlob(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Quantization tables in natural (row-major) order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantTables {
    pub luma: [u16; 64],
    pub chroma: [u16; 64],
}

/// libjpeg quality scaling of the Annex K tables.
pub fn quality_to_tables(q: u32) -> Result<QuantTables> {
    if !(1..=100).contains(&q) {
        return Err(Error::Param(format!("jpeg quality {q} outside [1, 100]")));
    }
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    let scale_table = |base: &[u16; 64]| {
        let mut t = [0u16; 64];
        for (dst, &b) in t.iter_mut().zip(base) {
            let v = (b as u32 * scale + 50) / 100;
            *dst = v.clamp(1, 255) as u16;
        }
        t
    };
    Ok(QuantTables {
        luma: scale_table(&tables::BASE_LUMA_QTABLE),
        chroma: scale_table(&tables::BASE_CHROMA_QTABLE),
    })
}

/// The `JPEG_q` operator: `q = 0` bypasses compression and returns the input unchanged.
pub fn jpeg_roundtrip(img: &Image, q: u32) -> Result<Image> {
    if q == 0 {
        return Ok(img.clone());
    }
    jpeg_decompress(&jpeg_compress(img, q)?)
}

/// `c(u) / 2 * cos((2x + 1) u pi / 16)`, indexed `[u][x]`.
fn dct_matrix() -> [[f64; 8]; 8] {
    let mut t = [[0.0; 8]; 8];
    for (u, row) in t.iter_mut().enumerate() {
        let cu = if u == 0 { std::f64::consts::FRAC_1_SQRT_2 } else { 1.0 };
        for (x, v) in row.iter_mut().enumerate() {
            *v = cu / 2.0
                * (((2 * x + 1) as f64 * u as f64 * std::f64::consts::PI) / 16.0).cos();
        }
    }
    t
}

pub(crate) fn fdct(block: &[f64; 64]) -> [f64; 64] {
    let t = dct_matrix();
    let mut tmp = [0.0; 64];
    for u in 0..8 {
        for y in 0..8 {
            tmp[u * 8 + y] = (0..8).map(|x| t[u][x] * block[y * 8 + x]).sum();
        }
    }
    let mut out = [0.0; 64];
    for v in 0..8 {
        for u in 0..8 {
            out[v * 8 + u] = (0..8).map(|y| t[v][y] * tmp[u * 8 + y]).sum();
        }
    }
    out
}

pub(crate) fn idct(coef: &[f64; 64]) -> [f64; 64] {
    let t = dct_matrix();
    let mut tmp = [0.0; 64];
    for v in 0..8 {
        for x in 0..8 {
            tmp[v * 8 + x] = (0..8).map(|u| t[u][x] * coef[v * 8 + u]).sum();
        }
    }
    let mut out = [0.0; 64];
    for y in 0..8 {
        for x in 0..8 {
            out[y * 8 + x] = (0..8).map(|v| t[v][y] * tmp[v * 8 + x]).sum();
        }
    }
    out
}

/// Canonical Huffman code assignment from the DHT `bits`/`vals` description.
/// Returns `(code, length)` pairs in the order of `vals`.
pub(crate) fn canonical_codes(bits: &[u8; 16]) -> Vec<(u16, u8)> {
    let mut out = Vec::new();
    let mut code: u32 = 0;
    for (len_minus_one, &count) in bits.iter().enumerate() {
        for _ in 0..count {
            out.push((code as u16, len_minus_one as u8 + 1));
            code += 1;
        }
        code <<= 1;
    }
    out
}

pub(crate) mod markers {
    pub const SOI: u8 = 0xD8;
    pub const EOI: u8 = 0xD9;
    pub const SOF0: u8 = 0xC0;
    pub const SOF1: u8 = 0xC1;
    pub const DHT: u8 = 0xC4;
    pub const DQT: u8 = 0xDB;
    pub const DRI: u8 = 0xDD;
    pub const SOS: u8 = 0xDA;
    pub const APP0: u8 = 0xE0;
    pub const COM: u8 = 0xFE;
}
