//! Finite-difference verification of hand-written backward passes.
//!
//! The probe loss is `L = sum(r * y)` for a fixed random projection `r`, so
//! the analytic gradient comes from a single backward pass seeded with `r`.

use super::layers::{Activation, BatchNorm, Conv4x4s2, Deconv4x4s2};
use super::{Discriminator, Mode, Module, ParamTensor, RecNet, Tensor, WarpNet};
use crate::error::Result;
use rand::seq::index::sample;
use rand::Rng;

pub const FD_STEP: f64 = 1e-5;
pub const MAX_COORDS: usize = 64;
/// Absolute floor of the relative-error denominator, so coordinates whose true
/// gradient is zero are judged on absolute error.
pub const REL_FLOOR: f64 = 1e-6;
/// Second-difference ratio above which a probe is taken to straddle a kink.
pub const KINK_TOL: f64 = 1e-4;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Name of the worst coordinate (`input[i]` or `param.name[i]`).
    pub worst: String,
    pub checked: usize,
    /// Probes dropped because `x +- h` straddles a ReLU kink.
    pub skipped: usize,
}

impl GradCheckReport {
    fn merge(&mut self, err: f64, what: impl FnOnce() -> String) {
        self.checked += 1;
        if err > self.max_rel_error || self.worst.is_empty() {
            self.max_rel_error = self.max_rel_error.max(err);
            self.worst = what();
        }
    }
}

/// `up` and `down` are `f(x + h) - f(x)` and `f(x - h) - f(x)`. Near a kink the
/// one-sided slopes disagree far more than smooth curvature allows; this
/// depends on the forward pass only, so it never hides a wrong backward.
pub fn straddles_kink(up: f64, down: f64) -> bool {
    let second = (up + down).abs();
    second > KINK_TOL * (up.abs() + down.abs()) && second > REL_FLOOR * FD_STEP
}

/// Up to `max` distinct coordinates from `0..len`, sorted.
pub fn sample_coords<R: Rng + ?Sized>(len: usize, max: usize, rng: &mut R) -> Vec<usize> {
    let mut v = if len <= max {
        (0..len).collect()
    } else {
        sample(rng, len, max).into_vec()
    };
    v.sort_unstable();
    v
}

/// A layer or network with a training-mode forward and matching backward.
pub trait Differentiable: Module {
    fn fwd(&mut self, x: &Tensor) -> Result<Tensor>;
    fn bwd(&mut self, grad: &Tensor) -> Result<Tensor>;
}

impl Differentiable for Conv4x4s2 {
    fn fwd(&mut self, x: &Tensor) -> Result<Tensor> {
        self.forward(x)
    }
    fn bwd(&mut self, g: &Tensor) -> Result<Tensor> {
        self.backward(g)
    }
}

impl Differentiable for Deconv4x4s2 {
    fn fwd(&mut self, x: &Tensor) -> Result<Tensor> {
        self.forward(x)
    }
    fn bwd(&mut self, g: &Tensor) -> Result<Tensor> {
        self.backward(g)
    }
}

impl Differentiable for BatchNorm {
    fn fwd(&mut self, x: &Tensor) -> Result<Tensor> {
        self.forward(x, Mode::Train)
    }
    fn bwd(&mut self, g: &Tensor) -> Result<Tensor> {
        self.backward(g)
    }
}

impl Module for Activation {
    fn params(&self) -> Vec<&ParamTensor> {
        Vec::new()
    }
    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        Vec::new()
    }
}

impl Differentiable for Activation {
    fn fwd(&mut self, x: &Tensor) -> Result<Tensor> {
        Ok(self.forward(x))
    }
    fn bwd(&mut self, g: &Tensor) -> Result<Tensor> {
        self.backward(g)
    }
}

impl Differentiable for WarpNet {
    fn fwd(&mut self, x: &Tensor) -> Result<Tensor> {
        self.forward(x, Mode::Train)
    }
    fn bwd(&mut self, g: &Tensor) -> Result<Tensor> {
        self.backward(g)
    }
}

impl Differentiable for RecNet {
    fn fwd(&mut self, x: &Tensor) -> Result<Tensor> {
        self.forward(x, Mode::Train)
    }
    fn bwd(&mut self, g: &Tensor) -> Result<Tensor> {
        self.backward(g)
    }
}

impl Differentiable for Discriminator {
    fn fwd(&mut self, x: &Tensor) -> Result<Tensor> {
        self.forward(x, Mode::Train)
    }
    fn bwd(&mut self, g: &Tensor) -> Result<Tensor> {
        self.backward(g)
    }
}

fn projected_delta(net: &mut dyn Differentiable, x: &Tensor, r: &Tensor, base: &Tensor) -> Result<f64> {
    let y = net.fwd(x)?;
    // Summing per-element differences against the base output keeps the
    // cancellation error at the scale of the perturbation.
    Ok(r.data.iter().zip(y.data.iter().zip(&base.data)).map(|(r, (a, b))| r * (a - b)).sum())
}

/// Check input and parameter gradients of `net` at input `x`, sampling up to
/// [`MAX_COORDS`] coordinates of each.
pub fn grad_check<R: Rng + ?Sized>(net: &mut dyn Differentiable, x: &Tensor, rng: &mut R) -> Result<GradCheckReport> {
    net.zero_grad();
    let base = net.fwd(x)?;
    let r = Tensor::randn(base.n, base.c, base.h, base.w, 1.0, rng);
    let gx = net.bwd(&r)?;
    let analytic_params: Vec<Vec<f64>> = net.params().iter().map(|p| p.grad.clone()).collect();

    let mut report = GradCheckReport { max_rel_error: 0.0, worst: String::new(), checked: 0, skipped: 0 };
    let mut xp = x.clone();
    for i in sample_coords(x.len(), MAX_COORDS, rng) {
        let orig = xp.data[i];
        xp.data[i] = orig + FD_STEP;
        let up = projected_delta(net, &xp, &r, &base)?;
        xp.data[i] = orig - FD_STEP;
        let down = projected_delta(net, &xp, &r, &base)?;
        xp.data[i] = orig;
        if straddles_kink(up, down) {
            report.skipped += 1;
            continue;
        }
        let numeric = (up - down) / (2.0 * FD_STEP);
        report.merge(relative_error(gx.data[i], numeric), || format!("input[{i}]"));
    }

    let sizes: Vec<usize> = net.params().iter().map(|p| p.len()).collect();
    let total: usize = sizes.iter().sum();
    for flat in sample_coords(total, MAX_COORDS, rng) {
        let (mut t, mut k) = (0, flat);
        while k >= sizes[t] {
            k -= sizes[t];
            t += 1;
        }
        let orig = net.params()[t].values[k];
        net.params_mut()[t].values[k] = orig + FD_STEP;
        let up = projected_delta(net, x, &r, &base)?;
        net.params_mut()[t].values[k] = orig - FD_STEP;
        let down = projected_delta(net, x, &r, &base)?;
        net.params_mut()[t].values[k] = orig;
        if straddles_kink(up, down) {
            report.skipped += 1;
            continue;
        }
        let numeric = (up - down) / (2.0 * FD_STEP);
        let name = net.params()[t].name.clone();
        report.merge(relative_error(analytic_params[t][k], numeric), || format!("{name}[{k}]"));
    }
    Ok(report)
}

/// Check an arbitrary scalar function of a vector against its claimed gradient.
pub fn grad_check_fn<R: Rng + ?Sized>(
    x: &[f64],
    analytic: &[f64],
    rng: &mut R,
    mut f: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<GradCheckReport> {
    let mut report = GradCheckReport { max_rel_error: 0.0, worst: String::new(), checked: 0, skipped: 0 };
    let mut xp = x.to_vec();
    for i in sample_coords(x.len(), MAX_COORDS, rng) {
        let orig = xp[i];
        xp[i] = orig + FD_STEP;
        let up = f(&xp)?;
        xp[i] = orig - FD_STEP;
        let down = f(&xp)?;
        xp[i] = orig;
        let numeric = (up - down) / (2.0 * FD_STEP);
        report.merge(relative_error(analytic[i], numeric), || format!("x[{i}]"));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layers::ActKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn linear_layer_is_nearly_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut conv = Conv4x4s2::new("c", 3, 4, &mut rng);
        let x = Tensor::randn(2, 3, 8, 8, 1.0, &mut rng);
        let rep = grad_check(&mut conv, &x, &mut rng).unwrap();
        assert!(rep.max_rel_error <= 1e-7, "{rep:?}");
    }

    #[test]
    fn relu_away_from_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut x = Tensor::randn(2, 3, 8, 8, 1.0, &mut rng);
        for v in x.data.iter_mut() {
            if v.abs() < 0.1 {
                *v += 0.2f64.copysign(*v);
            }
        }
        let mut act = Activation::new(ActKind::Relu);
        let rep = grad_check(&mut act, &x, &mut rng).unwrap();
        assert!(rep.max_rel_error <= 1e-6, "{rep:?}");
    }

    #[test]
    fn kink_detection() {
        let h = FD_STEP;
        let probe = |f: &dyn Fn(f64) -> f64, x: f64| straddles_kink(f(x + h) - f(x), f(x - h) - f(x));
        let relu = |x: f64| x.max(0.0);
        assert!(probe(&relu, 0.3 * h));
        assert!(!probe(&relu, 0.5));
        assert!(!probe(&|x: f64| 3.0 * x * x + x, 0.2));
        assert!(!probe(&|x: f64| (2.0 * x).tanh(), -0.7));
        // flat regions carry no signal either way
        assert!(!probe(&relu, -0.5));
    }

    /// Leaky ReLU whose backward is off by one percent.
    struct Skewed(Activation);

    impl Module for Skewed {
        fn params(&self) -> Vec<&ParamTensor> {
            Vec::new()
        }
        fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
            Vec::new()
        }
    }

    impl Differentiable for Skewed {
        fn fwd(&mut self, x: &Tensor) -> Result<Tensor> {
            Ok(self.0.forward(x))
        }
        fn bwd(&mut self, g: &Tensor) -> Result<Tensor> {
            let mut gx = self.0.backward(g)?;
            gx.data.iter_mut().for_each(|v| *v *= 1.01);
            Ok(gx)
        }
    }

    #[test]
    fn wrong_backward_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = Tensor::randn(1, 2, 6, 6, 1.0, &mut rng);
        let rep = grad_check(&mut Skewed(Activation::new(ActKind::LeakyRelu)), &x, &mut rng).unwrap();
        assert!(rep.max_rel_error > 5e-3, "{rep:?}");
    }

    #[test]
    fn coordinate_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_coords(5, 64, &mut rng), vec![0, 1, 2, 3, 4]);
        let s = sample_coords(1000, 64, &mut rng);
        assert_eq!(s.len(), 64);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
    }
}
