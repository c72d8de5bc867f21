//! Oracles shared by several test targets.
#![allow(dead_code)]

use gfr::toyface::{gen_toy_face, ToyFaceSpec};
use gfr::Image;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn brute_psnr(a: &Image, b: &Image) -> f64 {
    let (h, w, c) = a.dims();
    let mut sse = 0.0;
    for i in 0..h {
        for j in 0..w {
            for k in 0..c {
                let d = a.get(i, j, k) - b.get(i, j, k);
                sse += d * d;
            }
        }
    }
    let mse = sse / (h * w * c) as f64;
    -10.0 * mse.log10()
}

/// Definitional SSIM: a full 2-D Gaussian window at every valid position,
/// weighted moments computed about the window means.
pub fn brute_ssim(a: &Image, b: &Image) -> f64 {
    let (h, w, c) = a.dims();
    let n = 11;
    let sigma: f64 = 1.5;
    let mut win = vec![0.0; n * n];
    for u in 0..n {
        for v in 0..n {
            let (du, dv) = (u as f64 - 5.0, v as f64 - 5.0);
            win[u * n + v] = (-(du * du + dv * dv) / (2.0 * sigma * sigma)).exp();
        }
    }
    let total: f64 = win.iter().sum();
    win.iter_mut().for_each(|x| *x /= total);
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut acc = 0.0;
    let mut count = 0usize;
    for k in 0..c {
        for i0 in 0..=h - n {
            for j0 in 0..=w - n {
                let (mut mx, mut my) = (0.0, 0.0);
                for u in 0..n {
                    for v in 0..n {
                        mx += win[u * n + v] * a.get(i0 + u, j0 + v, k);
                        my += win[u * n + v] * b.get(i0 + u, j0 + v, k);
                    }
                }
                let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
                for u in 0..n {
                    for v in 0..n {
                        let dx = a.get(i0 + u, j0 + v, k) - mx;
                        let dy = b.get(i0 + u, j0 + v, k) - my;
                        vx += win[u * n + v] * dx * dx;
                        vy += win[u * n + v] * dy * dy;
                        cxy += win[u * n + v] * dx * dy;
                    }
                }
                acc += (2.0 * mx * my + c1) * (2.0 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1;
            }
        }
    }
    acc / count as f64
}

/// Ten toy faces with assorted sizes, including ones that are not multiples of 16.
pub fn corpus() -> Vec<Image> {
    let sizes = [32, 40, 48, 64, 33, 45, 37, 50, 32, 57];
    sizes
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
            gen_toy_face(&ToyFaceSpec::sample(1000 + i as u64, s, &mut rng)).unwrap().0
        })
        .collect()
}
