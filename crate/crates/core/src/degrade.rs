//! Synthetic degradation: Gaussian blur, bicubic downsampling, additive white
//! Gaussian noise at the downsampled size, JPEG compression, and bicubic
//! upsampling back to the input size.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::jpeg::jpeg_roundtrip;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Smallest intermediate side length; one JPEG block.
pub const MIN_INTERMEDIATE: usize = 8;

/// `(blur sigma, scale, noise sigma in 8-bit units, jpeg quality)`; `q = 0` skips JPEG.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegradationParams {
    pub blur_sigma: f64,
    pub scale: f64,
    pub noise_sigma: f64,
    pub jpeg_q: u32,
}

impl DegradationParams {
    pub const NOOP: DegradationParams = DegradationParams {
        blur_sigma: 0.0,
        scale: 1.0,
        noise_sigma: 0.0,
        jpeg_q: 0,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.blur_sigma.is_finite() && self.blur_sigma >= 0.0) {
            return Err(Error::Param(format!("blur sigma {} must be >= 0", self.blur_sigma)));
        }
        if !(self.scale.is_finite() && self.scale >= 1.0) {
            return Err(Error::Param(format!("scale {} must be >= 1", self.scale)));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Param(format!("noise sigma {} must be >= 0", self.noise_sigma)));
        }
        if self.jpeg_q > 100 {
            return Err(Error::Param(format!("jpeg quality {} must be <= 100", self.jpeg_q)));
        }
        Ok(())
    }

    /// Whether the tuple lies in the sampling sets of [`sample_params`].
    pub fn in_sampling_sets(&self) -> bool {
        let tenths = |v: f64| (v * 10.0).round();
        let on_grid = |v: f64| (v * 10.0 - tenths(v)).abs() < 1e-9;
        let blur_ok = self.blur_sigma == 0.0 || ((1.0..=3.0).contains(&self.blur_sigma) && on_grid(self.blur_sigma));
        let scale_ok = (1.0..=8.0).contains(&self.scale) && on_grid(self.scale);
        let noise_ok = (0.0..=7.0).contains(&self.noise_sigma) && self.noise_sigma.fract() == 0.0;
        let q_ok = self.jpeg_q == 0 || (10..=40).contains(&self.jpeg_q);
        blur_ok && scale_ok && noise_ok && q_ok
    }
}

/// Square, normalized, isotropic blur kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    radius: usize,
    weights: Vec<f64>,
}

impl Kernel {
    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn size(&self) -> usize {
        2 * self.radius + 1
    }

    /// Row-major `(2r+1)^2` weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, dy: isize, dx: isize) -> f64 {
        let r = self.radius as isize;
        self.weights[((dy + r) * (2 * r + 1) + dx + r) as usize]
    }
}

/// Gaussian kernel truncated at `max(1, ceil(3 sigma))`; `sigma = 0` is the delta kernel.
pub fn gaussian_kernel(sigma: f64) -> Result<Kernel> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::Param(format!("blur sigma {sigma} must be >= 0")));
    }
    let radius = ((3.0 * sigma).ceil() as usize).max(1);
    let n = 2 * radius + 1;
    let mut weights = vec![0.0; n * n];
    if sigma == 0.0 {
        weights[radius * n + radius] = 1.0;
        return Ok(Kernel { radius, weights });
    }
    let r = radius as isize;
    for dy in -r..=r {
        for dx in -r..=r {
            weights[((dy + r) * n as isize + dx + r) as usize] =
                (-((dy * dy + dx * dx) as f64) / (2.0 * sigma * sigma)).exp();
        }
    }
    let sum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= sum);
    Ok(Kernel { radius, weights })
}

/// Per-channel 2-D correlation with clamp-to-edge padding.
pub fn convolve(img: &Image, k: &Kernel) -> Image {
    let (h, w, c) = img.dims();
    let r = k.radius() as isize;
    let mut out = vec![0.0; h * w * c];
    for i in 0..h {
        for j in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for dy in -r..=r {
                    for dx in -r..=r {
                        let wgt = k.weight(dy, dx);
                        if wgt != 0.0 {
                            acc += wgt * img.get_clamped(i as isize + dy, j as isize + dx, ch);
                        }
                    }
                }
                out[(i * w + j) * c + ch] = acc;
            }
        }
    }
    Image::from_vec(h, w, c, out).expect("same dimensions")
}

/// Catmull-Rom cubic (`a = -0.5`).
#[inline]
pub fn cubic_weight(t: f64) -> f64 {
    const A: f64 = -0.5;
    let x = t.abs();
    if x <= 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

/// Four source taps and weights for one output coordinate, pixel-center aligned.
fn taps(dst: usize, in_len: usize, out_len: usize) -> ([usize; 4], [f64; 4]) {
    let src = (dst as f64 + 0.5) * in_len as f64 / out_len as f64 - 0.5;
    let base = src.floor();
    let frac = src - base;
    let mut idx = [0usize; 4];
    let mut wts = [0.0; 4];
    for k in 0..4 {
        let off = k as isize - 1;
        idx[k] = (base as isize + off).clamp(0, in_len as isize - 1) as usize;
        wts[k] = cubic_weight(frac - off as f64);
    }
    (idx, wts)
}

/// Separable bicubic resampling to `out_h x out_w`, output clamped to `[0, 1]`.
pub fn resample_bicubic(img: &Image, out_h: usize, out_w: usize) -> Result<Image> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::Param("resample target must be at least 1x1".into()));
    }
    let (h, w, c) = img.dims();
    let col_taps: Vec<_> = (0..out_w).map(|j| taps(j, w, out_w)).collect();
    let row_taps: Vec<_> = (0..out_h).map(|i| taps(i, h, out_h)).collect();
    let mut tmp = vec![0.0; h * out_w * c];
    for i in 0..h {
        for (j, (idx, wts)) in col_taps.iter().enumerate() {
            for ch in 0..c {
                tmp[(i * out_w + j) * c + ch] = (0..4).map(|k| wts[k] * img.get(i, idx[k], ch)).sum();
            }
        }
    }
    let mut out = vec![0.0; out_h * out_w * c];
    for (i, (idx, wts)) in row_taps.iter().enumerate() {
        for j in 0..out_w {
            for ch in 0..c {
                out[(i * out_w + j) * c + ch] =
                    (0..4).map(|k| wts[k] * tmp[(idx[k] * out_w + j) * c + ch]).sum();
            }
        }
    }
    Image::from_vec(out_h, out_w, c, out)
}

/// Adds `N(0, (sigma / 255)^2)` to every sample, then clamps.
pub fn add_awgn<R: Rng + ?Sized>(img: &Image, sigma: f64, rng: &mut R) -> Image {
    if sigma == 0.0 {
        return img.clone();
    }
    let s = sigma / 255.0;
    let data = img
        .data()
        .iter()
        .map(|&v| {
            let n: f64 = rng.sample(StandardNormal);
            v + s * n
        })
        .collect();
    let (h, w, c) = img.dims();
    Image::from_vec(h, w, c, data).expect("same dimensions")
}

/// Intermediate products of [`degrade`], exposed for inspection.
#[derive(Debug, Clone)]
pub struct DegradeTrace {
    pub blurred: Image,
    pub downsampled: Image,
    pub noisy: Image,
    pub compressed: Image,
    pub output: Image,
}

/// Size of the downsampled observation for scale `s`.
pub fn intermediate_size(h: usize, w: usize, scale: f64) -> (usize, usize) {
    (
        ((h as f64 / scale).round() as usize).max(1),
        ((w as f64 / scale).round() as usize).max(1),
    )
}

pub fn degrade_traced<R: Rng + ?Sized>(img: &Image, p: &DegradationParams, rng: &mut R) -> Result<DegradeTrace> {
    p.validate()?;
    let (h, w, _) = img.dims();
    let (sh, sw) = intermediate_size(h, w, p.scale);
    if sh < MIN_INTERMEDIATE || sw < MIN_INTERMEDIATE {
        return Err(Error::Param(format!(
            "scale {} reduces {h}x{w} to {sh}x{sw}, below the {MIN_INTERMEDIATE}x{MIN_INTERMEDIATE} floor",
            p.scale
        )));
    }
    let blurred = convolve(img, &gaussian_kernel(p.blur_sigma)?);
    let downsampled = resample_bicubic(&blurred, sh, sw)?;
    let noisy = add_awgn(&downsampled, p.noise_sigma, rng);
    let compressed = jpeg_roundtrip(&noisy, p.jpeg_q)?;
    let output = resample_bicubic(&compressed, h, w)?;
    Ok(DegradeTrace { blurred, downsampled, noisy, compressed, output })
}

/// Degraded observation at the input's size.
pub fn degrade<R: Rng + ?Sized>(img: &Image, p: &DegradationParams, rng: &mut R) -> Result<Image> {
    Ok(degrade_traced(img, p, rng)?.output)
}

/// Uniform independent draws from `blur in {0, 1:0.1:3}`, `scale in {1:0.1:8}`,
/// `noise in {0:1:7}`, `q in {0, 10:1:40}`.
pub fn sample_params<R: Rng + ?Sized>(rng: &mut R) -> DegradationParams {
    let blur_idx = rng.random_range(0..22u32);
    let blur_sigma = if blur_idx == 0 { 0.0 } else { (9 + blur_idx) as f64 / 10.0 };
    let scale = rng.random_range(10..=80u32) as f64 / 10.0;
    let noise_sigma = rng.random_range(0..=7u32) as f64;
    let q_idx = rng.random_range(0..32u32);
    let jpeg_q = if q_idx == 0 { 0 } else { 9 + q_idx };
    DegradationParams { blur_sigma, scale, noise_sigma, jpeg_q }
}

/// [`sample_params`] restricted to scales that keep an `h x w` image at or
/// above the intermediate size floor (rejection sampling on the scale).
pub fn sample_params_for_size<R: Rng + ?Sized>(rng: &mut R, h: usize, w: usize) -> DegradationParams {
    let mut p = sample_params(rng);
    loop {
        let (sh, sw) = intermediate_size(h, w, p.scale);
        if sh >= MIN_INTERMEDIATE && sw >= MIN_INTERMEDIATE {
            return p;
        }
        p.scale = rng.random_range(10..=80u32) as f64 / 10.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ramp(h: usize, w: usize) -> Image {
        Image::from_fn(h, w, 1, |i, j, _| (i * w + j) as f64 / (h * w - 1) as f64)
    }

    #[test]
    fn delta_kernel() {
        let k = gaussian_kernel(0.0).unwrap();
        assert_eq!(k.radius(), 1);
        assert_eq!(k.weight(0, 0), 1.0);
        assert_eq!(k.weights().iter().sum::<f64>(), 1.0);
        assert!(gaussian_kernel(-0.1).is_err());
    }

    #[test]
    fn kernels_normalized_and_isotropic() {
        for s in [0.5, 1.0, 1.7, 3.0] {
            let k = gaussian_kernel(s).unwrap();
            assert_eq!(k.radius(), (3.0f64 * s).ceil() as usize);
            assert!((k.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let r = k.radius() as isize;
            for dy in -r..=r {
                for dx in -r..=r {
                    assert!((k.weight(dy, dx) - k.weight(-dx, dy)).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn unit_sigma_center_weight() {
        // Direct evaluation over the 7x7 grid.
        let mut sum = 0.0;
        for u in -3i32..=3 {
            for v in -3i32..=3 {
                sum += (-((u * u + v * v) as f64) / 2.0).exp();
            }
        }
        let k = gaussian_kernel(1.0).unwrap();
        assert!((k.weight(0, 0) - 1.0 / sum).abs() < 1e-15);
    }

    #[test]
    fn convolve_delta_and_constant() {
        let im = ramp(5, 6);
        assert_eq!(convolve(&im, &gaussian_kernel(0.0).unwrap()), im);
        let flat = Image::filled(7, 7, 3, 0.42);
        let out = convolve(&flat, &gaussian_kernel(2.0).unwrap());
        assert!(out.data().iter().all(|v| (v - 0.42).abs() < 1e-12));
    }

    #[test]
    fn cubic_partition_of_unity() {
        for k in 0..=20 {
            let f = k as f64 / 20.0;
            let s: f64 = (-1..=2).map(|o| cubic_weight(f - o as f64)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert_eq!(cubic_weight(0.0), 1.0);
        assert_eq!(cubic_weight(1.0), 0.0);
        assert_eq!(cubic_weight(2.0), 0.0);
    }

    #[test]
    fn resample_identity_and_constant() {
        let im = Image::from_fn(9, 7, 3, |i, j, c| ((i * 7 + j) * 3 + c) as f64 / 200.0);
        let same = resample_bicubic(&im, 9, 7).unwrap();
        for (a, b) in im.data().iter().zip(same.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        let flat = Image::filled(10, 10, 1, 0.3);
        for (oh, ow) in [(3, 4), (17, 23), (1, 1)] {
            let out = resample_bicubic(&flat, oh, ow).unwrap();
            assert!(out.data().iter().all(|v| (v - 0.3).abs() < 1e-12));
        }
        assert!(resample_bicubic(&flat, 0, 3).is_err());
    }

    #[test]
    fn awgn_zero_and_determinism() {
        let im = ramp(8, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(add_awgn(&im, 0.0, &mut rng), im);
        let a = add_awgn(&im, 3.0, &mut ChaCha8Rng::seed_from_u64(5));
        let b = add_awgn(&im, 3.0, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
        assert_ne!(a, im);
    }

    #[test]
    fn awgn_statistics() {
        let im = Image::filled(256, 256, 1, 0.5);
        let out = add_awgn(&im, 7.0, &mut ChaCha8Rng::seed_from_u64(99));
        let d: Vec<f64> = out.data().iter().map(|v| v - 0.5).collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (d.len() - 1) as f64;
        let target = 7.0 / 255.0;
        assert!((var.sqrt() - target).abs() / target < 0.05);
    }

    #[test]
    fn noop_tuple_is_identity() {
        let im = Image::from_fn(16, 16, 3, |i, j, c| ((i * 16 + j) * 3 + c) as f64 / 800.0);
        let out = degrade(&im, &DegradationParams::NOOP, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        for (a, b) in im.data().iter().zip(out.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn size_contract_and_floor() {
        let im = ramp(64, 64);
        let p = DegradationParams { scale: 4.0, ..DegradationParams::NOOP };
        let t = degrade_traced(&im, &p, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(t.downsampled.dims(), (16, 16, 1));
        assert_eq!(t.output.dims(), (64, 64, 1));
        let small = ramp(32, 32);
        let p = DegradationParams { scale: 5.0, ..DegradationParams::NOOP };
        assert!(matches!(
            degrade(&small, &p, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(Error::Param(_))
        ));
    }

    #[test]
    fn sampled_params_valid_and_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws: Vec<_> = (0..10_000).map(|_| sample_params(&mut rng)).collect();
        assert!(draws.iter().all(|p| p.in_sampling_sets() && p.validate().is_ok()));
        let mut seen = [false; 22];
        for p in &draws {
            let idx = if p.blur_sigma == 0.0 { 0 } else { (p.blur_sigma * 10.0).round() as usize - 9 };
            seen[idx] = true;
        }
        assert!(seen.iter().all(|&s| s));
        let mut rng2 = ChaCha8Rng::seed_from_u64(3);
        let again: Vec<_> = (0..10_000).map(|_| sample_params(&mut rng2)).collect();
        assert_eq!(draws, again);
    }

    #[test]
    fn size_restricted_sampling_respects_floor() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..2000 {
            let p = sample_params_for_size(&mut rng, 32, 32);
            let (sh, sw) = intermediate_size(32, 32, p.scale);
            assert!(sh >= 8 && sw >= 8);
            assert!(p.in_sampling_sets());
        }
    }
}
