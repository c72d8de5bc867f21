//! Dataset synthesis, optimization, the two-phase schedule, ablations and evaluation.

pub mod adam;
pub mod data;
pub mod eval;
pub mod model;
pub mod run;

use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::nn::NetConfig;
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, Adam, AdamConfig};
pub use data::{build_dataset, make_pair, make_pair_with, with_random_guides, SamplePair, Split};
pub use eval::{evaluate, EvalMetrics, MetricRow, MetricTable};
pub use model::{ModelConfig, Restorer};
pub use run::{pretrain_warpnet, train_full, PhaseSchedule, TrainEvent};

/// Which inputs the restoration network receives and which losses are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    /// Warped guide, flow loss, pretrained warp network.
    Full,
    /// Degraded input only: no guide, no warp network.
    MinusWg,
    /// Degraded input and the unwarped guide.
    MinusW,
    /// Warped guide but no flow loss and no pretraining.
    MinusF,
    /// Full model trained and evaluated with guides of other identities.
    RandomGuide,
}

impl Ablation {
    pub const ALL: [Ablation; 5] = [
        Ablation::Full,
        Ablation::MinusWg,
        Ablation::MinusW,
        Ablation::MinusF,
        Ablation::RandomGuide,
    ];

    pub fn uses_warp(self) -> bool {
        !matches!(self, Ablation::MinusWg | Ablation::MinusW)
    }

    pub fn uses_flow_loss(self) -> bool {
        self.uses_warp() && self != Ablation::MinusF
    }

    pub fn rec_in_channels(self) -> usize {
        if self == Ablation::MinusWg {
            3
        } else {
            6
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::MinusWg => "minus_wg",
            Ablation::MinusW => "minus_w",
            Ablation::MinusF => "minus_f",
            Ablation::RandomGuide => "random_guide",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub seed: u64,
    pub net: NetConfig,
    pub disc_base_channels: usize,
    /// Learning rate of each phase, strictly decreasing.
    pub lr: [f64; 3],
    pub adam: AdamConfig,
    pub batch: usize,
    pub pretrain_epochs: usize,
    pub total_epochs: usize,
    pub weights: LossWeights,
    pub train_pairs: usize,
    pub test_pairs: usize,
    /// Horizontal-flip augmentation.
    pub flip: bool,
    /// Epochs in the moving mean that decides phase advances.
    pub plateau_window: usize,
    /// Minimum relative improvement of the moving mean to stay in a phase.
    pub plateau_tol: f64,
    pub ablation: Ablation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            net: NetConfig::default(),
            disc_base_channels: 16,
            lr: [2e-4, 2e-5, 2e-6],
            adam: AdamConfig::default(),
            batch: 1,
            pretrain_epochs: 5,
            total_epochs: 20,
            weights: LossWeights::default(),
            train_pairs: 500,
            test_pairs: 100,
            flip: true,
            plateau_window: 5,
            plateau_tol: 1e-3,
            ablation: Ablation::Full,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.net.validate()?;
        self.weights.validate()?;
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.batch != 1 {
            return bad("only batch size 1 is supported");
        }
        if self.net.input_size < crate::toyface::MIN_SIZE {
            return bad("net.input_size must be at least 32 to render toy faces");
        }
        if self.total_epochs == 0 {
            return bad("total_epochs must be positive");
        }
        if self.train_pairs == 0 || self.test_pairs == 0 {
            return bad("train_pairs and test_pairs must be positive");
        }
        if self.disc_base_channels == 0 {
            return bad("disc_base_channels must be positive");
        }
        if !self.lr.iter().all(|l| l.is_finite() && *l > 0.0) || !(self.lr[0] > self.lr[1] && self.lr[1] > self.lr[2]) {
            return bad("lr phases must be positive and strictly decreasing");
        }
        let a = &self.adam;
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || !(a.eps > 0.0) {
            return bad("adam betas must lie in [0, 1) and eps must be positive");
        }
        if self.plateau_window == 0 || !(self.plateau_tol >= 0.0) {
            return bad("plateau_window must be positive and plateau_tol nonnegative");
        }
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig { net: self.net, disc_base_channels: self.disc_base_channels, ablation: self.ablation }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_rejects_bad_values() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        assert!(TrainConfig { batch: 2, ..c.clone() }.validate().is_err());
        assert!(TrainConfig { lr: [2e-4, 2e-4, 2e-6], ..c.clone() }.validate().is_err());
        assert!(TrainConfig { total_epochs: 0, ..c.clone() }.validate().is_err());
        let parsed: std::result::Result<TrainConfig, _> = serde_json::from_str(r#"{"seed": 1, "bogus": 2}"#);
        assert!(parsed.is_err());
        let parsed: TrainConfig = serde_json::from_str(r#"{"seed": 1, "ablation": "minus_wg"}"#).unwrap();
        assert_eq!(parsed.ablation, Ablation::MinusWg);
    }

    #[test]
    fn ablation_wiring() {
        assert_eq!(Ablation::MinusWg.rec_in_channels(), 3);
        assert!(!Ablation::MinusW.uses_warp());
        assert!(Ablation::MinusF.uses_warp() && !Ablation::MinusF.uses_flow_loss());
        assert!(Ablation::RandomGuide.uses_flow_loss());
    }
}
