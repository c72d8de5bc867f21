//! Feature extractors for the perceptual loss.

use super::layers::{ActKind, Activation, Conv4x4s2};
use super::{Module, ParamTensor, Tensor};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// A frozen differentiable mapping from images to feature maps. `backward`
/// refers to the most recent `forward`.
pub trait FeatureExtractor {
    fn forward(&mut self, x: &Tensor) -> Result<Tensor>;
    fn backward(&mut self, grad: &Tensor) -> Result<Tensor>;
}

/// `psi(x) = x`; reduces the perceptual loss to the mean squared error.
#[derive(Debug, Clone, Default)]
pub struct IdentityFeatures;

impl FeatureExtractor for IdentityFeatures {
    fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        Ok(x.clone())
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        Ok(grad.clone())
    }
}

pub const FEATURE_SEED: u64 = 0x5eed_f00d;
pub const FEATURE_WIDTHS: [usize; 3] = [8, 16, 16];

/// Stack of fixed random stride-2 convolutions with ReLU, drawn from a fixed
/// seed with He-scaled weights; `layer` selects how many stages are used.
#[derive(Debug, Clone)]
pub struct ConvFeatures {
    convs: Vec<Conv4x4s2>,
    acts: Vec<Activation>,
}

impl ConvFeatures {
    pub fn new(in_channels: usize, layer: usize) -> Result<Self> {
        if layer == 0 || layer > FEATURE_WIDTHS.len() {
            return Err(Error::Config(format!(
                "feature layer must be in 1..={}, got {layer}",
                FEATURE_WIDTHS.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(FEATURE_SEED);
        let mut convs = Vec::with_capacity(layer);
        let mut cin = in_channels;
        for (i, &cout) in FEATURE_WIDTHS.iter().take(layer).enumerate() {
            let mut conv = Conv4x4s2::new(&format!("features.conv{i}"), cin, cout, &mut rng);
            let std = (2.0 / (16 * cin) as f64).sqrt();
            for w in conv.weight.values.iter_mut() {
                *w = std * rng.sample::<f64, _>(StandardNormal);
            }
            convs.push(conv);
            cin = cout;
        }
        let acts = (0..layer).map(|_| Activation::new(ActKind::Relu)).collect();
        Ok(Self { convs, acts })
    }
}

impl Default for ConvFeatures {
    fn default() -> Self {
        Self::new(3, 2).expect("default feature layer is valid")
    }
}

impl FeatureExtractor for ConvFeatures {
    fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        for (c, a) in self.convs.iter_mut().zip(&mut self.acts) {
            h = a.forward(&c.forward(&h)?);
        }
        Ok(h)
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let mut g = grad.clone();
        for (c, a) in self.convs.iter_mut().zip(&mut self.acts).rev() {
            g = c.backward(&a.backward(&g)?)?;
        }
        Ok(g)
    }
}

impl Module for ConvFeatures {
    fn params(&self) -> Vec<&ParamTensor> {
        self.convs.iter().flat_map(|c| c.params()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        self.convs.iter_mut().flat_map(|c| c.params_mut()).collect()
    }
}
