//! Bias-corrected Adam.

use crate::nn::{Module, ParamTensor};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.5, beta2: 0.999, eps: 1e-8 }
    }
}

/// One Adam update at step `t` (1-based) for every tensor; gradients are zeroed afterwards.
pub fn adam_step<'a>(params: impl IntoIterator<Item = &'a mut ParamTensor>, lr: f64, cfg: &AdamConfig, t: u64) {
    let t = t.max(1) as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for p in params {
        for i in 0..p.values.len() {
            let g = p.grad[i];
            p.adam_m[i] = cfg.beta1 * p.adam_m[i] + (1.0 - cfg.beta1) * g;
            p.adam_v[i] = cfg.beta2 * p.adam_v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = p.adam_m[i] / bc1;
            let v_hat = p.adam_v[i] / bc2;
            p.values[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
            p.grad[i] = 0.0;
        }
    }
}

/// Adam state for one module: hyper-parameters and the step counter.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    pub t: u64,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self { config, t: 0 }
    }

    pub fn step(&mut self, module: &mut dyn Module, lr: f64) {
        self.t += 1;
        adam_step(module.params_mut(), lr, &self.config, self.t);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = ParamTensor::new("p", &[3], vec![1.0, -2.0, 0.5]);
        adam_step([&mut p], 0.1, &AdamConfig::default(), 1);
        assert_eq!(p.values, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn first_step_is_sign_step() {
        // f(x) = x^2 at x = 1: gradient 2, bias-corrected first step moves by ~lr.
        let mut p = ParamTensor::new("x", &[1], vec![1.0]);
        p.grad[0] = 2.0;
        adam_step([&mut p], 1e-3, &AdamConfig::default(), 1);
        assert!((p.values[0] - (1.0 - 1e-3)).abs() < 1e-10);
        assert_eq!(p.grad[0], 0.0);
    }
}
