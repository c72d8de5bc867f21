mod common;

use common::{brute_psnr, brute_ssim};
use gfr::metrics::{psnr, ssim};
use gfr::Image;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> Image {
    Image::from_fn(h, w, c, |_, _, _| rng.random())
}

fn perturbed(rng: &mut ChaCha8Rng, img: &Image, amp: f64) -> Image {
    let (h, w, c) = img.dims();
    Image::from_fn(h, w, c, |i, j, k| img.get(i, j, k) + amp * (rng.random::<f64>() - 0.5))
}

#[test]
fn psnr_and_ssim_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (h, w, c) in [(11, 11, 1), (16, 13, 3), (32, 32, 3), (20, 27, 1)] {
        for amp in [0.02, 0.2, 1.0] {
            let a = random_image(&mut rng, h, w, c);
            let b = perturbed(&mut rng, &a, amp);
            assert!((psnr(&a, &b).unwrap() - brute_psnr(&a, &b)).abs() <= 1e-9);
            assert!((ssim(&a, &b).unwrap() - brute_ssim(&a, &b)).abs() <= 1e-6);
        }
    }
}

#[test]
fn analytic_anchors() {
    let a = Image::filled(16, 16, 3, 0.25);
    let b = Image::filled(16, 16, 3, 0.35);
    assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = random_image(&mut rng, 24, 24, 3);
    assert_eq!(ssim(&x, &x).unwrap(), 1.0);
    assert_eq!(psnr(&x, &x).unwrap(), f64::INFINITY);
}

#[test]
fn mismatched_or_tiny_inputs_are_rejected() {
    let a = Image::zeros(16, 16, 3);
    assert!(psnr(&a, &Image::zeros(16, 15, 3)).is_err());
    assert!(ssim(&Image::zeros(10, 16, 1), &Image::zeros(10, 16, 1)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn metrics_are_symmetric_and_bounded(seed in any::<u64>(), amp in 0.01f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_image(&mut rng, 14, 14, 3);
        let b = perturbed(&mut rng, &a, amp);
        let (p1, p2) = (psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        prop_assert_eq!(p1, p2);
        prop_assert!(p1 >= 0.0);
        let (s1, s2) = (ssim(&a, &b).unwrap(), ssim(&b, &a).unwrap());
        prop_assert!((s1 - s2).abs() < 1e-12);
        prop_assert!(s1 <= 1.0 + 1e-12 && s1 >= -1.0);
    }

    #[test]
    fn psnr_decreases_with_larger_error(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Image::filled(8, 8, 1, 0.5);
        let d: f64 = rng.random_range(0.01..0.2);
        let near = Image::filled(8, 8, 1, 0.5 + d);
        let far = Image::filled(8, 8, 1, 0.5 + 2.0 * d);
        prop_assert!(psnr(&a, &near).unwrap() > psnr(&a, &far).unwrap());
    }
}
