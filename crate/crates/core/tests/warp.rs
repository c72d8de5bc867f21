use gfr::image::{norm_to_pixel, pixel_to_norm};
use gfr::warp::{flow_identity, sample_flow, warp_bilinear, FlowField};
use gfr::Image;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_image(seed: u64, h: usize, w: usize) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Image::from_fn(h, w, 3, |_, _, _| rng.random())
}

/// Bilinear sample of `img` at fractional pixel position `(py, px)`, clamped to the border.
fn bilinear_oracle(img: &Image, py: f64, px: f64, k: usize) -> f64 {
    let (h, w, _) = img.dims();
    let py = py.clamp(0.0, (h - 1) as f64);
    let px = px.clamp(0.0, (w - 1) as f64);
    let (y0, x0) = (py.floor() as usize, px.floor() as usize);
    let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
    let (fy, fx) = (py - y0 as f64, px - x0 as f64);
    (1.0 - fy) * ((1.0 - fx) * img.get(y0, x0, k) + fx * img.get(y0, x1, k))
        + fy * ((1.0 - fx) * img.get(y1, x0, k) + fx * img.get(y1, x1, k))
}

#[test]
fn identity_flow_reproduces_the_guide() {
    for (h, w) in [(32, 32), (17, 9), (1, 5)] {
        let g = random_image(h as u64, h, w);
        let out = warp_bilinear(&g, &flow_identity(h, w));
        let err = out.data().iter().zip(g.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-12, "{h}x{w}: {err}");
    }
}

#[test]
fn integer_targets_copy_exact_pixels() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (gh, gw, h, w) = (12, 10, 7, 8);
    let g = random_image(1, gh, gw);
    let mut src = Vec::new();
    let mut fx = Vec::new();
    let mut fy = Vec::new();
    for _ in 0..h * w {
        let (r, c) = (rng.random_range(0..gh), rng.random_range(0..gw));
        src.push((r, c));
        fx.push(pixel_to_norm(c as f64, gw));
        fy.push(pixel_to_norm(r as f64, gh));
    }
    let out = warp_bilinear(&g, &FlowField::new(h, w, fx, fy).unwrap());
    for (idx, &(r, c)) in src.iter().enumerate() {
        for k in 0..3 {
            assert!((out.get(idx / w, idx % w, k) - g.get(r, c, k)).abs() <= 1e-12);
        }
    }
}

#[test]
fn fractional_flows_match_direct_bilinear() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (gh, gw, h, w) = (9, 13, 6, 5);
    let g = random_image(2, gh, gw);
    let fx: Vec<f64> = (0..h * w).map(|_| rng.random_range(-1.3..1.3)).collect();
    let fy: Vec<f64> = (0..h * w).map(|_| rng.random_range(-1.3..1.3)).collect();
    let flow = FlowField::new(h, w, fx.clone(), fy.clone()).unwrap();
    let out = warp_bilinear(&g, &flow);
    for idx in 0..h * w {
        let (py, px) = (norm_to_pixel(fy[idx], gh), norm_to_pixel(fx[idx], gw));
        for k in 0..3 {
            assert!((out.get(idx / w, idx % w, k) - bilinear_oracle(&g, py, px, k)).abs() < 1e-12);
        }
    }
}

#[test]
fn flow_sampling_interpolates_the_field() {
    let (h, w) = (6, 6);
    let f = flow_identity(h, w);
    let ([x, y], taps) = sample_flow(&f, 0.13, -0.41);
    assert!((x - 0.13).abs() < 1e-12 && (y + 0.41).abs() < 1e-12);
    assert!((taps.iter().map(|t| t.1).sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn flow_files_roundtrip() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut coords = || (0..12).map(|_| rng.random_range(-1.5f32..1.5) as f64).collect();
    let f = FlowField::new(4, 3, coords(), coords()).unwrap();
    let bytes = f.to_bytes();
    assert_eq!(FlowField::from_bytes(&bytes).unwrap(), f);
    let g = FlowField::new(4, 3, vec![0.1; 12], vec![-0.7; 12]).unwrap();
    let back = FlowField::from_bytes(&g.to_bytes()).unwrap();
    assert!(back.phi_x.iter().all(|&v| (v - 0.1).abs() <= 1e-7));
    assert_eq!(back.to_bytes(), g.to_bytes());
    assert!(FlowField::from_bytes(&f.to_bytes()[..10]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn constant_guides_stay_constant(v in 0.0f64..1.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Image::filled(7, 7, 3, v);
        let fx = (0..25).map(|_| rng.random_range(-2.0..2.0)).collect();
        let fy = (0..25).map(|_| rng.random_range(-2.0..2.0)).collect();
        let out = warp_bilinear(&g, &FlowField::new(5, 5, fx, fy).unwrap());
        prop_assert!(out.data().iter().all(|x| (x - v).abs() < 1e-12));
    }

    #[test]
    fn warping_commutes_with_mirroring(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_image(seed, 8, 8);
        let fx = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fy = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = FlowField::new(8, 8, fx, fy).unwrap();
        let a = warp_bilinear(&g, &f).flip_horizontal();
        let b = warp_bilinear(&g.flip_horizontal(), &f.flip_horizontal());
        for (x, y) in a.data().iter().zip(b.data()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn outputs_stay_within_guide_range(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_image(seed ^ 1, 6, 9);
        let fx = (0..20).map(|_| rng.random_range(-1.5..1.5)).collect();
        let fy = (0..20).map(|_| rng.random_range(-1.5..1.5)).collect();
        let out = warp_bilinear(&g, &FlowField::new(4, 5, fx, fy).unwrap());
        let (lo, hi) = g.data().iter().fold((1.0f64, 0.0f64), |(l, h), &x| (l.min(x), h.max(x)));
        prop_assert!(out.data().iter().all(|&x| x >= lo - 1e-12 && x <= hi + 1e-12));
    }
}
