//! Full-reference quality metrics with peak value 1.0.

use crate::error::{Error, Result};
use crate::image::Image;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    a.check_same_shape(b, "mse")?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.data().len() as f64)
}

/// Peak signal-to-noise ratio in dB. Identical images give `f64::INFINITY`.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / m).log10())
}

/// Normalized 1-D Gaussian taps of the SSIM window.
pub fn ssim_taps() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut taps = [0.0; SSIM_WINDOW];
    for (k, t) in taps.iter_mut().enumerate() {
        let d = k as f64 - r;
        *t = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= s);
    taps
}

/// Valid-region separable filtering of one plane.
fn filter_valid(plane: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let n = taps.len();
    let ow = w - n + 1;
    let oh = h - n + 1;
    let mut tmp = vec![0.0; h * ow];
    for i in 0..h {
        let row = &plane[i * w..(i + 1) * w];
        for j in 0..ow {
            tmp[i * ow + j] = taps.iter().zip(&row[j..j + n]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for i in 0..oh {
        for j in 0..ow {
            out[i * ow + j] = (0..n).map(|k| taps[k] * tmp[(i + k) * ow + j]).sum();
        }
    }
    out
}

/// Mean structural similarity over an 11x11 Gaussian window (sigma 1.5),
/// averaged over channels.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    a.check_same_shape(b, "ssim")?;
    let (h, w, c) = a.dims();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::Shape(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}"
        )));
    }
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let taps = ssim_taps();
    let pa = a.to_planar();
    let pb = b.to_planar();
    let mut total = 0.0;
    for ch in 0..c {
        let x = &pa[ch * h * w..(ch + 1) * h * w];
        let y = &pb[ch * h * w..(ch + 1) * h * w];
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(y).map(|(p, q)| p * q).collect();
        let mx = filter_valid(x, h, w, &taps);
        let my = filter_valid(y, h, w, &taps);
        let mxx = filter_valid(&xx, h, w, &taps);
        let myy = filter_valid(&yy, h, w, &taps);
        let mxy = filter_valid(&xy, h, w, &taps);
        let mut acc = 0.0;
        for k in 0..mx.len() {
            let (ux, uy) = (mx[k], my[k]);
            let vx = mxx[k] - ux * ux;
            let vy = myy[k] - uy * uy;
            let cxy = mxy[k] - ux * uy;
            acc += ((2.0 * ux * uy + c1) * (2.0 * cxy + c2))
                / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
        }
        total += acc / mx.len() as f64;
    }
    Ok(total / c as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_images() {
        let a = Image::from_fn(12, 12, 3, |i, j, c| ((i * 7 + j * 3 + c) % 11) as f64 / 10.0);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_offset_is_twenty_db() {
        let a = Image::filled(4, 4, 1, 0.3);
        let b = Image::filled(4, 4, 1, 0.4);
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn mismatch_and_small_inputs_error() {
        let a = Image::zeros(4, 4, 1);
        assert!(psnr(&a, &Image::zeros(4, 5, 1)).is_err());
        assert!(ssim(&a, &a).is_err());
    }

    #[test]
    fn anticorrelated_binary_is_negative() {
        let a = Image::from_fn(16, 16, 1, |i, j, _| ((i + j) % 2) as f64);
        let b = Image::from_fn(16, 16, 1, |i, j, _| 1.0 - a.get(i, j, 0));
        assert!(ssim(&a, &b).unwrap() < 0.0);
    }

    #[test]
    fn taps_sum_to_one() {
        let t = ssim_taps();
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(t[0], t[10]);
    }
}
