//! The trainable restoration model: warp network, restoration network and
//! the two discriminators, plus checkpoint conversion.

use super::Ablation;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::nn::checkpoint::{round_to_f32, Checkpoint};
use crate::nn::nets::flow_from_tensor;
use crate::nn::{Discriminator, Mode, Module, NetConfig, RecNet, Tensor, WarpNet};
use crate::warp::{flow_identity, warp_bilinear, FlowField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Batch-norm behaviour used for restoration and evaluation. Training runs
/// at batch size 1, so every layer learns on per-image statistics; running
/// averages of those statistics describe no single image and degrade results.
pub const INFERENCE_MODE: Mode = Mode::Infer;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub net: NetConfig,
    pub disc_base_channels: usize,
    pub ablation: Ablation,
}

#[derive(Debug, Clone)]
pub struct Restorer {
    pub config: ModelConfig,
    pub warp: Option<WarpNet>,
    pub rec: RecNet,
    pub d_global: Discriminator,
    pub d_local: Discriminator,
}

impl Restorer {
    /// Fresh networks; each draws its initial weights from its own stream of `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.net.validate()?;
        let rng = |stream: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(stream);
            r
        };
        let warp = if config.ablation.uses_warp() {
            Some(WarpNet::new(config.net, &mut rng(11))?)
        } else {
            None
        };
        Ok(Self {
            config,
            warp,
            rec: RecNet::new(config.net, config.ablation.rec_in_channels(), &mut rng(12))?,
            d_global: Discriminator::new("d_global", config.disc_base_channels, &mut rng(13)),
            d_local: Discriminator::new("d_local", config.disc_base_channels, &mut rng(14)),
        })
    }

    pub fn size(&self) -> usize {
        self.config.net.input_size
    }

    /// Flow used to warp the guide; the identity for variants without a warp network.
    pub fn flow(&mut self, degraded: &Image, guide: &Image, mode: Mode) -> Result<FlowField> {
        let s = self.size();
        match &mut self.warp {
            Some(w) => w.predict_flow(degraded, guide, mode),
            None => Ok(flow_identity(s, s)),
        }
    }

    /// Restore `degraded` with `guide`; returns `(restored, warped guide)`.
    pub fn restore(&mut self, degraded: &Image, guide: &Image) -> Result<(Image, Image)> {
        self.restore_with(degraded, guide, INFERENCE_MODE)
    }

    pub fn restore_with(&mut self, degraded: &Image, guide: &Image, mode: Mode) -> Result<(Image, Image)> {
        let s = self.size();
        for im in [degraded, guide] {
            if im.dims() != (s, s, 3) {
                return Err(Error::Shape(format!(
                    "model expects {s}x{s} RGB images, got {:?}",
                    im.dims()
                )));
            }
        }
        let flow = self.flow(degraded, guide, mode)?;
        let warped = warp_bilinear(guide, &flow);
        let restored = self.rec.restore(degraded, &warped, mode)?;
        Ok((restored, warped))
    }

    /// Restoration-network input for one observation.
    pub(crate) fn rec_input(&self, degraded: &Tensor, warped: &Image) -> Result<Tensor> {
        if self.rec.in_channels == 3 {
            Ok(degraded.clone())
        } else {
            Tensor::concat_channels(degraded, &Tensor::from_image(warped))
        }
    }

    pub(crate) fn flow_from_output(t: &Tensor) -> Result<FlowField> {
        flow_from_tensor(t, 0)
    }

    fn modules(&self) -> Vec<&dyn Module> {
        let mut v: Vec<&dyn Module> = Vec::new();
        if let Some(w) = &self.warp {
            v.push(w);
        }
        v.push(&self.rec);
        v.push(&self.d_global);
        v.push(&self.d_local);
        v
    }

    /// Round all weights to `f32`, the checkpoint precision.
    pub fn finalize(&mut self) {
        if let Some(w) = &mut self.warp {
            round_to_f32(w);
        }
        round_to_f32(&mut self.rec);
        round_to_f32(&mut self.d_global);
        round_to_f32(&mut self.d_local);
    }

    pub fn to_checkpoint(&self, step: u64) -> Result<Checkpoint> {
        let meta = serde_json::to_value(self.config).map_err(|e| Error::Config(e.to_string()))?;
        let mut ck = Checkpoint::new(step, meta);
        for m in self.modules() {
            ck.add_module(m)?;
        }
        Ok(ck)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let config: ModelConfig = serde_json::from_value(ck.meta.clone())
            .map_err(|e| Error::Config(format!("checkpoint model config: {e}")))?;
        let mut model = Restorer::new(config, 0)?;
        if let Some(w) = &mut model.warp {
            ck.load_into(w)?;
        }
        ck.load_into(&mut model.rec)?;
        ck.load_into(&mut model.d_global)?;
        ck.load_into(&mut model.d_local)?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_roundtrip_restores_identically() {
        let cfg = ModelConfig { net: NetConfig::new(4, 32).unwrap(), disc_base_channels: 4, ablation: Ablation::Full };
        let mut m = Restorer::new(cfg, 3).unwrap();
        m.finalize();
        let ck = Checkpoint::from_bytes(&m.to_checkpoint(7).unwrap().to_bytes().unwrap()).unwrap();
        let mut back = Restorer::from_checkpoint(&ck).unwrap();
        let d = Image::from_fn(32, 32, 3, |i, j, c| ((i + 2 * j + c) % 9) as f64 / 9.0);
        let g = Image::from_fn(32, 32, 3, |i, j, c| ((3 * i + j + c) % 7) as f64 / 7.0);
        assert_eq!(m.restore(&d, &g).unwrap(), back.restore(&d, &g).unwrap());
    }

    #[test]
    fn variants_without_warp_use_the_raw_guide() {
        let cfg = ModelConfig { net: NetConfig::new(4, 32).unwrap(), disc_base_channels: 4, ablation: Ablation::MinusW };
        let mut m = Restorer::new(cfg, 1).unwrap();
        assert!(m.warp.is_none());
        let g = Image::from_fn(32, 32, 3, |i, j, _| ((i * j) % 5) as f64 / 5.0);
        let (_, warped) = m.restore(&g, &g).unwrap();
        for (a, b) in warped.data().iter().zip(g.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(m.restore(&Image::zeros(16, 16, 3), &g).is_err());
    }
}
