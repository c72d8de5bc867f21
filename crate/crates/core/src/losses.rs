//! Training objectives with analytic gradients: reconstruction (pixel and
//! feature space), adversarial, landmark alignment and flow smoothness.
//!
//! All norms are means, so magnitudes do not depend on resolution.

use crate::error::{Error, Result};
use crate::image::LandmarkSet;
use crate::nn::features::FeatureExtractor;
use crate::nn::Tensor;
use crate::warp::{sample_flow, FlowField};
use serde::{Deserialize, Serialize};

/// Probability guard for the logarithms of the adversarial losses.
pub const PROB_EPS: f64 = 1e-7;
/// Smoothed target for real samples.
pub const REAL_LABEL: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub r0: f64,
    pub rl: f64,
    pub ag: f64,
    pub al: f64,
    pub lm: f64,
    pub tv: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { r0: 100.0, rl: 0.001, ag: 1.0, al: 0.5, lm: 10.0, tv: 1.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.r0, self.rl, self.ag, self.al, self.lm, self.tv];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config("loss weights must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

/// Value and gradient with respect to the prediction.
#[derive(Debug, Clone)]
pub struct Scored {
    pub value: f64,
    pub grad: Tensor,
}

/// Squared Euclidean distance `||pred - target||^2`, summed over every
/// sample; gradient `2 (pred - target)`.
pub fn loss_l2(pred: &Tensor, target: &Tensor) -> Result<Scored> {
    sq_dist(pred, target, 1.0, "l2")
}

/// `scale * ||pred - target||^2` with its gradient.
fn sq_dist(pred: &Tensor, target: &Tensor, scale: f64, what: &str) -> Result<Scored> {
    if !pred.same_shape(target) {
        return Err(Error::Shape(format!("{what} of {:?} and {:?}", pred.shape(), target.shape())));
    }
    let mut grad = Tensor::zeros(pred.n, pred.c, pred.h, pred.w);
    let mut sum = 0.0;
    for ((g, p), t) in grad.data.iter_mut().zip(&pred.data).zip(&target.data) {
        let d = p - t;
        sum += d * d;
        *g = 2.0 * scale * d;
    }
    Ok(Scored { value: scale * sum, grad })
}

/// Squared feature distance normalized by the feature-map size.
pub fn loss_perceptual(pred: &Tensor, target: &Tensor, psi: &mut dyn FeatureExtractor) -> Result<Scored> {
    if !pred.same_shape(target) {
        return Err(Error::Shape(format!(
            "perceptual loss of {:?} and {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    // Target features first: the extractor's backward refers to its last forward.
    let ft = psi.forward(target)?;
    let fp = psi.forward(pred)?;
    let Scored { value, grad } = sq_dist(&fp, &ft, 1.0 / fp.len() as f64, "perceptual features")?;
    let grad = psi.backward(&grad)?;
    Ok(Scored { value, grad })
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub l2: f64,
    pub perceptual: f64,
    pub value: f64,
    pub grad: Tensor,
}

/// `r0 * l2 + rl * perceptual`, with the matching gradient.
pub fn loss_reconstruction(
    pred: &Tensor,
    target: &Tensor,
    psi: &mut dyn FeatureExtractor,
    w: &LossWeights,
) -> Result<Reconstruction> {
    let l2 = loss_l2(pred, target)?;
    let mut grad = l2.grad;
    grad.data.iter_mut().for_each(|g| *g *= w.r0);
    let perceptual = if w.rl != 0.0 {
        let p = loss_perceptual(pred, target, psi)?;
        for (g, pg) in grad.data.iter_mut().zip(&p.grad.data) {
            *g += w.rl * pg;
        }
        p.value
    } else {
        0.0
    };
    Ok(Reconstruction {
        l2: l2.value,
        perceptual,
        value: w.r0 * l2.value + w.rl * perceptual,
        grad,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Generator,
    Discriminator,
}

#[derive(Debug, Clone)]
pub struct Adversarial {
    pub value: f64,
    pub grad_real: Tensor,
    pub grad_fake: Tensor,
}

#[inline]
fn guard(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Discriminator: binary cross-entropy towards 0.9 on real maps and 0 on
/// fake maps. Generator: non-saturating `-mean log d_fake`; `d_real` is unused
/// and its gradient is zero.
pub fn loss_adversarial(d_real: &Tensor, d_fake: &Tensor, role: Role) -> Result<Adversarial> {
    let mut grad_real = Tensor::zeros(d_real.n, d_real.c, d_real.h, d_real.w);
    let mut grad_fake = Tensor::zeros(d_fake.n, d_fake.c, d_fake.h, d_fake.w);
    let nf = d_fake.len() as f64;
    if nf == 0.0 {
        return Err(Error::Shape("empty discriminator map".into()));
    }
    let value = match role {
        Role::Generator => {
            let mut s = 0.0;
            for (g, &p) in grad_fake.data.iter_mut().zip(&d_fake.data) {
                let p = guard(p);
                s -= p.ln();
                *g = -1.0 / (p * nf);
            }
            s / nf
        }
        Role::Discriminator => {
            if !d_real.same_shape(d_fake) {
                return Err(Error::Shape(format!(
                    "real map {:?} vs fake map {:?}",
                    d_real.shape(),
                    d_fake.shape()
                )));
            }
            let (mut sr, mut sf) = (0.0, 0.0);
            for (g, &p) in grad_real.data.iter_mut().zip(&d_real.data) {
                let p = guard(p);
                sr -= REAL_LABEL * p.ln() + (1.0 - REAL_LABEL) * (1.0 - p).ln();
                *g = -(REAL_LABEL / p - (1.0 - REAL_LABEL) / (1.0 - p)) / nf;
            }
            for (g, &p) in grad_fake.data.iter_mut().zip(&d_fake.data) {
                let p = guard(p);
                sf -= (1.0 - p).ln();
                *g = 1.0 / ((1.0 - p) * nf);
            }
            (sr + sf) / nf
        }
    };
    Ok(Adversarial { value, grad_real, grad_fake })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdversarialTotal {
    pub value: f64,
    /// Set when the local term was dropped because its crop was degenerate.
    pub local_skipped: bool,
}

/// `ag * global + al * local`; `None` for a local term whose bounding box had zero area.
pub fn loss_adversarial_combined(global: f64, local: Option<f64>, w: &LossWeights) -> AdversarialTotal {
    match local {
        Some(l) => AdversarialTotal { value: w.ag * global + w.al * l, local_skipped: false },
        None => AdversarialTotal { value: w.ag * global, local_skipped: true },
    }
}

/// Mean over landmarks of the squared distance between the flow sampled at
/// the target landmark and the corresponding guide landmark. The gradient is
/// scattered onto the four flow cells around each landmark.
pub fn loss_landmark(flow: &FlowField, lm_target: &LandmarkSet, lm_guide: &LandmarkSet) -> Result<(f64, FlowField)> {
    if lm_target.len() != lm_guide.len() {
        return Err(Error::Shape(format!(
            "landmark counts differ: {} vs {}",
            lm_target.len(),
            lm_guide.len()
        )));
    }
    let mut grad = FlowField::zeros(flow.height, flow.width);
    if lm_target.is_empty() {
        return Ok((0.0, grad));
    }
    let k = lm_target.len() as f64;
    let mut sum = 0.0;
    for (t, g) in lm_target.points().iter().zip(lm_guide.points()) {
        let (v, taps) = sample_flow(flow, t[0], t[1]);
        let (dx, dy) = (v[0] - g[0], v[1] - g[1]);
        sum += dx * dx + dy * dy;
        for (idx, wt) in taps {
            grad.phi_x[idx] += 2.0 * dx * wt / k;
            grad.phi_y[idx] += 2.0 * dy * wt / k;
        }
    }
    Ok((sum / k, grad))
}

/// Squared forward differences of both flow components: mean over horizontal
/// neighbour pairs plus mean over vertical neighbour pairs.
pub fn loss_tv(flow: &FlowField) -> (f64, FlowField) {
    let (h, w) = (flow.height, flow.width);
    let mut grad = FlowField::zeros(h, w);
    let nh = (h * w.saturating_sub(1)) as f64;
    let nv = (h.saturating_sub(1) * w) as f64;
    let mut value = 0.0;
    for (phi, g) in [(&flow.phi_x, &mut grad.phi_x), (&flow.phi_y, &mut grad.phi_y)] {
        if nh > 0.0 {
            for i in 0..h {
                for j in 0..w - 1 {
                    let d = phi[i * w + j + 1] - phi[i * w + j];
                    value += d * d / nh;
                    g[i * w + j + 1] += 2.0 * d / nh;
                    g[i * w + j] -= 2.0 * d / nh;
                }
            }
        }
        if nv > 0.0 {
            for i in 0..h - 1 {
                for j in 0..w {
                    let d = phi[(i + 1) * w + j] - phi[i * w + j];
                    value += d * d / nv;
                    g[(i + 1) * w + j] += 2.0 * d / nv;
                    g[i * w + j] -= 2.0 * d / nv;
                }
            }
        }
    }
    (value, grad)
}

#[derive(Debug, Clone)]
pub struct FlowLoss {
    pub landmark: f64,
    pub tv: f64,
    pub value: f64,
    pub grad: FlowField,
}

/// `lm * landmark + tv * smoothness`.
pub fn loss_flow(flow: &FlowField, lm_target: &LandmarkSet, lm_guide: &LandmarkSet, w: &LossWeights) -> Result<FlowLoss> {
    let (landmark, gl) = loss_landmark(flow, lm_target, lm_guide)?;
    let (tv, gt) = loss_tv(flow);
    let mut grad = FlowField::zeros(flow.height, flow.width);
    for (i, g) in grad.phi_x.iter_mut().enumerate() {
        *g = w.lm * gl.phi_x[i] + w.tv * gt.phi_x[i];
    }
    for (i, g) in grad.phi_y.iter_mut().enumerate() {
        *g = w.lm * gl.phi_y[i] + w.tv * gt.phi_y[i];
    }
    Ok(FlowLoss { landmark, tv, value: w.lm * landmark + w.tv * tv, grad })
}

/// Overall objective: reconstruction + adversarial + flow.
pub fn total_objective(reconstruction: f64, adversarial: f64, flow: f64) -> f64 {
    reconstruction + adversarial + flow
}

/// One JSON line of the training log. Components are recorded as they enter
/// the objective (already weighted), so `total` is their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossRecord {
    pub step: u64,
    pub l2: f64,
    pub perc: f64,
    pub adv_g: f64,
    pub adv_l: f64,
    pub lm: f64,
    pub tv: f64,
    pub total: f64,
}

impl LossRecord {
    /// Weight raw component values and fill in the total.
    pub fn weighted(step: u64, raw: [f64; 6], w: &LossWeights) -> Self {
        let [l2, perc, adv_g, adv_l, lm, tv] = raw;
        let mut r = LossRecord {
            step,
            l2: w.r0 * l2,
            perc: w.rl * perc,
            adv_g: w.ag * adv_g,
            adv_l: w.al * adv_l,
            lm: w.lm * lm,
            tv: w.tv * tv,
            total: 0.0,
        };
        r.total = total_objective(r.l2 + r.perc, r.adv_g + r.adv_l, r.lm + r.tv);
        r
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("loss record serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::features::IdentityFeatures;
    use crate::warp::flow_identity;

    fn t(v: Vec<f64>) -> Tensor {
        let n = v.len();
        Tensor::from_vec(1, 1, 1, n, v).unwrap()
    }

    #[test]
    fn l2_anchors() {
        let a = t(vec![0.2, 0.5, 0.7]);
        let s = loss_l2(&a, &a).unwrap();
        assert_eq!(s.value, 0.0);
        assert!(s.grad.data.iter().all(|&g| g == 0.0));
        let b = t(vec![0.3, 0.6, 0.8]);
        assert!((loss_l2(&b, &a).unwrap().value - 0.03).abs() < 1e-15);
        assert!(loss_l2(&a, &t(vec![0.0; 2])).is_err());
    }

    #[test]
    fn identity_perceptual_is_mean_of_l2() {
        let a = t(vec![0.1, 0.4, 0.9, 0.3]);
        let b = t(vec![0.2, 0.1, 0.5, 0.35]);
        let p = loss_perceptual(&a, &b, &mut IdentityFeatures).unwrap();
        let l = loss_l2(&a, &b).unwrap();
        assert!((p.value - l.value / 4.0).abs() < 1e-15);
        for (pg, lg) in p.grad.data.iter().zip(&l.grad.data) {
            assert!((pg - lg / 4.0).abs() < 1e-15);
        }
    }

    #[test]
    fn reconstruction_weights() {
        let a = t(vec![0.1, 0.4]);
        let b = t(vec![0.3, 0.2]);
        let zero = LossWeights { r0: 0.0, rl: 0.0, ..Default::default() };
        assert_eq!(loss_reconstruction(&a, &b, &mut IdentityFeatures, &zero).unwrap().value, 0.0);
        let only_l2 = LossWeights { rl: 0.0, ..Default::default() };
        let r = loss_reconstruction(&a, &b, &mut IdentityFeatures, &only_l2).unwrap();
        assert_eq!(r.value, 100.0 * loss_l2(&a, &b).unwrap().value);
    }

    #[test]
    fn generator_at_half() {
        let fake = t(vec![0.5; 4]);
        let a = loss_adversarial(&fake, &fake, Role::Generator).unwrap();
        assert!((a.value - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(a.grad_real.data.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn discriminator_minimum_at_smoothed_target() {
        let fake = t(vec![1e-9; 4]);
        let at = |p: f64| loss_adversarial(&t(vec![p; 4]), &fake, Role::Discriminator).unwrap().value;
        let best = at(0.9);
        let entropy = -(0.9f64 * 0.9f64.ln() + 0.1 * 0.1f64.ln());
        assert!((best - entropy).abs() < 1e-6);
        assert!(at(0.85) > best && at(0.95) > best && at(0.999) > best);
    }

    #[test]
    fn combined_adversarial() {
        let w = LossWeights::default();
        assert_eq!(loss_adversarial_combined(0.7, Some(0.4), &w).value, 0.7 + 0.5 * 0.4);
        let z = LossWeights { al: 0.0, ..w };
        assert_eq!(loss_adversarial_combined(0.7, Some(0.4), &z).value, 0.7);
        let s = loss_adversarial_combined(0.7, None, &w);
        assert!(s.local_skipped);
        assert_eq!(s.value, 0.7);
    }

    #[test]
    fn landmark_offset_in_x() {
        let flow = flow_identity(8, 8);
        // Lattice points, so the identity flow reproduces them exactly.
        let target = LandmarkSet::new(vec![[-0.75, -0.25], [0.25, 0.5 + 0.125], [0.125, -0.875]]).unwrap();
        assert_eq!(loss_landmark(&flow, &target, &target).unwrap().0, 0.0);
        let mut moved = target.points().to_vec();
        moved[1][0] += 0.1;
        let guide = LandmarkSet::new(moved).unwrap();
        let (v, _) = loss_landmark(&flow, &target, &guide).unwrap();
        assert!((v - 0.01 / 3.0).abs() < 1e-15);
        let short = LandmarkSet::new(vec![[0.0, 0.0]]).unwrap();
        assert!(loss_landmark(&flow, &target, &short).is_err());
    }

    #[test]
    fn tv_of_constant_and_identity() {
        let c = FlowField::new(3, 4, vec![0.3; 12], vec![-0.2; 12]).unwrap();
        assert_eq!(loss_tv(&c).0, 0.0);
        let (v, _) = loss_tv(&flow_identity(4, 4));
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn record_total_is_sum() {
        let r = LossRecord::weighted(5, [0.01, 2.0, 0.7, 0.6, 0.003, 0.01], &LossWeights::default());
        let s = r.l2 + r.perc + r.adv_g + r.adv_l + r.lm + r.tv;
        assert!((r.total - s).abs() < 1e-12);
        let back: LossRecord = serde_json::from_str(&r.to_json_line()).unwrap();
        assert_eq!(back, r);
    }
}
