//! The full finite-difference suite: every layer, the warp, every loss and
//! each network at a tiny configuration.

use crate::error::Result;
use crate::image::{Image, LandmarkSet};
use crate::losses::{loss_adversarial, loss_l2, loss_landmark, loss_perceptual, loss_tv, Role};
use crate::nn::features::ConvFeatures;
use crate::nn::gradcheck::{grad_check, grad_check_fn, Differentiable, GradCheckReport};
use crate::nn::layers::{ActKind, Activation, BatchNorm, Conv4x4s2, Deconv4x4s2};
use crate::nn::{Discriminator, Mode, Module, NetConfig, ParamTensor, RecNet, Tensor, WarpNet};
use crate::warp::{warp_backward, warp_bilinear, FlowField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const LAYER_TOLERANCE: f64 = 1e-4;
pub const NETWORK_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteEntry {
    pub component: &'static str,
    pub report: GradCheckReport,
    pub tolerance: f64,
}

impl SuiteEntry {
    pub fn passed(&self) -> bool {
        self.report.max_rel_error <= self.tolerance && self.report.checked > 0 && self.report.skipped <= self.report.checked
    }
}

/// Batch norm in evaluation mode with non-trivial running statistics.
struct EvalBatchNorm(BatchNorm);

impl Module for EvalBatchNorm {
    fn params(&self) -> Vec<&ParamTensor> {
        self.0.params()
    }
    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        self.0.params_mut()
    }
}

impl Differentiable for EvalBatchNorm {
    fn fwd(&mut self, x: &Tensor) -> Result<Tensor> {
        self.0.forward(x, Mode::Eval)
    }
    fn bwd(&mut self, g: &Tensor) -> Result<Tensor> {
        self.0.backward(g)
    }
}

/// Push values at least `margin` away from zero, keeping their sign.
fn away_from_zero(t: &mut Tensor, margin: f64) {
    for v in t.data.iter_mut() {
        if v.abs() < margin {
            *v = if *v < 0.0 { -margin } else { margin } + *v;
        }
    }
}

/// Random normalized coordinate whose pixel position is at least 0.05 px from any lattice line.
fn off_lattice<R: Rng + ?Sized>(rng: &mut R, len: usize) -> f64 {
    let p: f64 = rng.random_range(0.0..(len - 1) as f64);
    let frac = p - p.floor();
    let p = p.floor() + frac.clamp(0.05, 0.95);
    crate::image::pixel_to_norm(p, len)
}

fn random_flow<R: Rng + ?Sized>(rng: &mut R, h: usize, w: usize) -> FlowField {
    let phi_x = (0..h * w).map(|_| off_lattice(rng, w)).collect();
    let phi_y = (0..h * w).map(|_| off_lattice(rng, h)).collect();
    FlowField::new(h, w, phi_x, phi_y).expect("sizes match")
}

fn random_image<R: Rng + ?Sized>(rng: &mut R, h: usize, w: usize) -> Image {
    let data = (0..h * w * 3).map(|_| rng.random::<f64>()).collect();
    Image::from_vec(h, w, 3, data).expect("valid image")
}

fn prob_map<R: Rng + ?Sized>(rng: &mut R) -> Tensor {
    let data = (0..2 * 16).map(|_| rng.random_range(0.05..0.95)).collect();
    Tensor::from_vec(2, 1, 4, 4, data).expect("shape")
}

/// Run every check; deterministic for a given seed.
pub fn gradient_suite(seed: u64) -> Result<Vec<SuiteEntry>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut push = |component, report, tolerance| out.push(SuiteEntry { component, report, tolerance });

    let x3 = |rng: &mut ChaCha8Rng| Tensor::randn(2, 3, 8, 8, 1.0, rng);

    let mut conv = Conv4x4s2::new("conv", 3, 4, &mut rng);
    let x = x3(&mut rng);
    push("conv4x4s2", grad_check(&mut conv, &x, &mut rng)?, LAYER_TOLERANCE);

    let mut deconv = Deconv4x4s2::new("deconv", 3, 4, &mut rng);
    let x = x3(&mut rng);
    push("deconv4x4s2", grad_check(&mut deconv, &x, &mut rng)?, LAYER_TOLERANCE);

    let mut bn = BatchNorm::new("bn", 3);
    bn.gamma.values = vec![1.3, -0.7, 0.9];
    bn.beta.values = vec![0.1, -0.2, 0.3];
    let x = x3(&mut rng);
    push("batchnorm_train", grad_check(&mut bn, &x, &mut rng)?, LAYER_TOLERANCE);
    bn.running_mean.values = vec![0.2, -0.1, 0.05];
    bn.running_var.values = vec![1.5, 0.7, 1.1];
    let mut ebn = EvalBatchNorm(bn);
    let x = x3(&mut rng);
    push("batchnorm_eval", grad_check(&mut ebn, &x, &mut rng)?, LAYER_TOLERANCE);

    for (name, kind) in [
        ("relu", ActKind::Relu),
        ("leaky_relu", ActKind::LeakyRelu),
        ("tanh", ActKind::Tanh),
        ("sigmoid", ActKind::Sigmoid),
    ] {
        let mut x = x3(&mut rng);
        away_from_zero(&mut x, 1e-2);
        push(name, grad_check(&mut Activation::new(kind), &x, &mut rng)?, LAYER_TOLERANCE);
    }

    // concat: L = <r, concat(a, b)> as a function of the stacked inputs
    let a = Tensor::randn(2, 2, 4, 4, 1.0, &mut rng);
    let b = Tensor::randn(2, 3, 4, 4, 1.0, &mut rng);
    let r = Tensor::randn(2, 5, 4, 4, 1.0, &mut rng);
    let (ga, gb) = r.split_channels(2)?;
    let stacked: Vec<f64> = a.data.iter().chain(&b.data).copied().collect();
    let analytic: Vec<f64> = ga.data.iter().chain(&gb.data).copied().collect();
    let rep = grad_check_fn(&stacked, &analytic, &mut rng, |v| {
        let a = Tensor::from_vec(2, 2, 4, 4, v[..64].to_vec())?;
        let b = Tensor::from_vec(2, 3, 4, 4, v[64..].to_vec())?;
        let c = Tensor::concat_channels(&a, &b)?;
        Ok(c.data.iter().zip(&r.data).map(|(x, y)| x * y).sum())
    })?;
    push("concat_channels", rep, LAYER_TOLERANCE);

    // warp: with respect to the flow and to the guide
    let guide = random_image(&mut rng, 9, 11);
    let flow = random_flow(&mut rng, 7, 6);
    let r: Vec<f64> = (0..7 * 6 * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (g_guide, g_flow) = warp_backward(&r, &guide, &flow)?;
    let dot = |im: &Image| -> f64 { im.data().iter().zip(&r).map(|(a, b)| a * b).sum() };
    let rep = grad_check_fn(&flow.to_planar(), &g_flow.to_planar(), &mut rng, |v| {
        Ok(dot(&warp_bilinear(&guide, &FlowField::from_planar(7, 6, v)?)))
    })?;
    push("warp_flow", rep, LAYER_TOLERANCE);
    // The guide enters linearly, so the guide check needs no clamping of values to [0, 1].
    let rep = grad_check_fn(guide.data(), &g_guide, &mut rng, |v| {
        let out = crate::warp::warp_raw(v, 9, 11, 3, &flow);
        Ok(out.iter().zip(&r).map(|(a, b)| a * b).sum())
    })?;
    push("warp_guide", rep, LAYER_TOLERANCE);

    // losses
    let p = Tensor::randn(1, 3, 8, 8, 1.0, &mut rng);
    let t = Tensor::randn(1, 3, 8, 8, 1.0, &mut rng);
    let g = loss_l2(&p, &t)?.grad;
    let rep = grad_check_fn(&p.data, &g.data, &mut rng, |v| {
        Ok(loss_l2(&Tensor::from_vec(1, 3, 8, 8, v.to_vec())?, &t)?.value)
    })?;
    push("loss_l2", rep, LAYER_TOLERANCE);

    let mut psi = ConvFeatures::default();
    let p = Tensor::from_vec(1, 3, 32, 32, (0..3 * 1024).map(|_| rng.random::<f64>()).collect())?;
    let t = Tensor::from_vec(1, 3, 32, 32, (0..3 * 1024).map(|_| rng.random::<f64>()).collect())?;
    let g = loss_perceptual(&p, &t, &mut psi)?.grad;
    let rep = grad_check_fn(&p.data, &g.data, &mut rng, |v| {
        Ok(loss_perceptual(&Tensor::from_vec(1, 3, 32, 32, v.to_vec())?, &t, &mut psi)?.value)
    })?;
    push("loss_perceptual", rep, LAYER_TOLERANCE);

    let (real, fake) = (prob_map(&mut rng), prob_map(&mut rng));
    let adv = loss_adversarial(&real, &fake, Role::Generator)?;
    let rep = grad_check_fn(&fake.data, &adv.grad_fake.data, &mut rng, |v| {
        let f = Tensor::from_vec(2, 1, 4, 4, v.to_vec())?;
        Ok(loss_adversarial(&real, &f, Role::Generator)?.value)
    })?;
    push("loss_adversarial_generator", rep, LAYER_TOLERANCE);
    let adv = loss_adversarial(&real, &fake, Role::Discriminator)?;
    let both: Vec<f64> = real.data.iter().chain(&fake.data).copied().collect();
    let gboth: Vec<f64> = adv.grad_real.data.iter().chain(&adv.grad_fake.data).copied().collect();
    let rep = grad_check_fn(&both, &gboth, &mut rng, |v| {
        let r = Tensor::from_vec(2, 1, 4, 4, v[..32].to_vec())?;
        let f = Tensor::from_vec(2, 1, 4, 4, v[32..].to_vec())?;
        Ok(loss_adversarial(&r, &f, Role::Discriminator)?.value)
    })?;
    push("loss_adversarial_discriminator", rep, LAYER_TOLERANCE);

    let flow = random_flow(&mut rng, 16, 16);
    let lm_t = LandmarkSet::new((0..12).map(|_| [off_lattice(&mut rng, 16), off_lattice(&mut rng, 16)]).collect())?;
    let lm_g = LandmarkSet::new((0..12).map(|_| [rng.random_range(-0.9..0.9), rng.random_range(-0.9..0.9)]).collect())?;
    let (_, g) = loss_landmark(&flow, &lm_t, &lm_g)?;
    let rep = grad_check_fn(&flow.to_planar(), &g.to_planar(), &mut rng, |v| {
        Ok(loss_landmark(&FlowField::from_planar(16, 16, v)?, &lm_t, &lm_g)?.0)
    })?;
    push("loss_landmark", rep, LAYER_TOLERANCE);
    let (_, g) = loss_tv(&flow);
    let rep = grad_check_fn(&flow.to_planar(), &g.to_planar(), &mut rng, |v| {
        Ok(loss_tv(&FlowField::from_planar(16, 16, v)?).0)
    })?;
    push("loss_tv", rep, LAYER_TOLERANCE);

    // networks at a tiny configuration
    let cfg = NetConfig::new(4, 32)?;
    let mut warp = WarpNet::new(cfg, &mut rng)?;
    let x = Tensor::randn(1, 6, 32, 32, 0.5, &mut rng);
    push("warpnet", grad_check(&mut warp, &x, &mut rng)?, NETWORK_TOLERANCE);
    let mut rec = RecNet::new(cfg, 6, &mut rng)?;
    let x = Tensor::randn(1, 6, 32, 32, 0.5, &mut rng);
    push("recnet", grad_check(&mut rec, &x, &mut rng)?, NETWORK_TOLERANCE);
    let mut disc = Discriminator::new("disc", 4, &mut rng);
    let x = Tensor::randn(2, 9, 32, 32, 0.5, &mut rng);
    push("discriminator", grad_check(&mut disc, &x, &mut rng)?, NETWORK_TOLERANCE);

    Ok(out)
}
