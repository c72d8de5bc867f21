//! Finite-difference checks for every layer family and each network.

use gfr::nn::gradcheck::{grad_check, Differentiable};
use gfr::nn::layers::{ActKind, Activation, BatchNorm, Conv4x4s2, Deconv4x4s2};
use gfr::nn::{Discriminator, NetConfig, RecNet, Tensor, WarpNet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn check(name: &str, net: &mut dyn Differentiable, x: &Tensor, seed: u64, tol: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rep = grad_check(net, x, &mut rng).unwrap();
    println!("{name}: max rel error {:.3e} at {} ({} coords)", rep.max_rel_error, rep.worst, rep.checked);
    assert!(rep.max_rel_error <= tol, "{name}: {rep:?}");
}

fn input(c: usize, seed: u64) -> Tensor {
    Tensor::randn(2, c, 8, 8, 1.0, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[test]
fn layer_families_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut conv = Conv4x4s2::new("conv", 3, 4, &mut rng);
    check("conv", &mut conv, &input(3, 2), 3, 1e-4);
    let mut deconv = Deconv4x4s2::new("deconv", 3, 2, &mut rng);
    check("deconv", &mut deconv, &input(3, 4), 5, 1e-4);
    let mut bn = BatchNorm::new("bn", 3);
    bn.gamma.values = vec![1.5, -0.5, 0.8];
    bn.beta.values = vec![0.1, 0.2, -0.3];
    check("batchnorm", &mut bn, &input(3, 6), 7, 1e-4);
    for (kind, seed) in [(ActKind::Relu, 8), (ActKind::LeakyRelu, 9), (ActKind::Tanh, 10), (ActKind::Sigmoid, 11)] {
        let mut x = input(3, seed);
        // keep away from the kink of the piecewise-linear activations
        x.data.iter_mut().filter(|v| v.abs() < 1e-3).for_each(|v| *v += 0.01);
        check(&format!("{kind:?}"), &mut Activation::new(kind), &x, seed + 100, 1e-4);
    }
}

#[test]
fn warpnet_end_to_end() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut net = WarpNet::new(NetConfig::new(4, 32).unwrap(), &mut rng).unwrap();
    let x = Tensor::randn(1, 6, 32, 32, 0.5, &mut rng);
    check("warpnet", &mut net, &x, 21, 1e-3);
}

#[test]
fn recnet_end_to_end() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let mut net = RecNet::new(NetConfig::new(4, 32).unwrap(), 6, &mut rng).unwrap();
    let x = Tensor::randn(1, 6, 32, 32, 0.5, &mut rng);
    check("recnet", &mut net, &x, 31, 1e-3);
}

#[test]
fn discriminator_end_to_end() {
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let mut net = Discriminator::new("d", 4, &mut rng);
    let x = Tensor::randn(2, 9, 32, 32, 0.5, &mut rng);
    check("discriminator", &mut net, &x, 41, 1e-3);
}
