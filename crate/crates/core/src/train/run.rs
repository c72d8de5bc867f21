//! Warp-network pretraining and end-to-end adversarial training.

use super::adam::Adam;
use super::data::{item_rng, with_random_guides, SamplePair};
use super::model::Restorer;
use super::{Ablation, TrainConfig};
use crate::error::{Error, Result};
use crate::image::landmark_bbox;
use crate::losses::{loss_adversarial, loss_flow, loss_landmark, loss_reconstruction, LossRecord, Role};
use crate::nn::features::ConvFeatures;
use crate::nn::{Discriminator, Mode, Module, Tensor};
use crate::warp::{crop_flow, warp_backward, warp_bilinear, warp_raw, FlowField};
use rand::seq::SliceRandom;
use rand::Rng;

/// Side length of the landmark-box crop seen by the local discriminator.
pub const LOCAL_PATCH: usize = 32;
const SHUFFLE_STREAM: u64 = 3;
const PRETRAIN_SHUFFLE_STREAM: u64 = 4;

pub enum TrainEvent<'a> {
    PretrainEpoch { epoch: usize, mean_landmark: f64 },
    Step(&'a LossRecord),
    Epoch { epoch: usize, mean_reconstruction: f64, lr: f64, model: &'a Restorer },
}

/// Learning-rate phases. The phase advances when the moving mean of the
/// per-epoch reconstruction loss over `window` epochs fails to improve on the
/// previous moving mean by the relative margin `tol`.
#[derive(Debug, Clone)]
pub struct PhaseSchedule {
    lrs: [f64; 3],
    window: usize,
    tol: f64,
    phase: usize,
    history: Vec<f64>,
    prev_mean: Option<f64>,
}

impl PhaseSchedule {
    pub fn new(lrs: [f64; 3], window: usize, tol: f64) -> Self {
        Self { lrs, window: window.max(1), tol, phase: 0, history: Vec::new(), prev_mean: None }
    }

    pub fn lr(&self) -> f64 {
        self.lrs[self.phase]
    }

    pub fn phase(&self) -> usize {
        self.phase
    }

    /// Record one epoch's mean reconstruction loss; returns whether the phase advanced.
    pub fn end_epoch(&mut self, recon: f64) -> bool {
        self.history.push(recon);
        if self.history.len() < self.window {
            return false;
        }
        let tail = &self.history[self.history.len() - self.window..];
        let mean = tail.iter().sum::<f64>() / self.window as f64;
        let stalled = matches!(self.prev_mean, Some(p) if mean > p * (1.0 - self.tol));
        self.prev_mean = Some(mean);
        if stalled && self.phase + 1 < self.lrs.len() {
            self.phase += 1;
            self.history.clear();
            self.prev_mean = None;
            return true;
        }
        false
    }
}

fn epoch_order(cfg: &TrainConfig, stream: u64, epoch: usize, n: usize) -> Vec<(usize, bool)> {
    let mut rng = item_rng(cfg.seed, stream, epoch as u64);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    idx.into_iter().map(|i| (i, cfg.flip && rng.random_bool(0.5))).collect()
}

fn pick(data: &[SamplePair], (i, flip): (usize, bool)) -> std::borrow::Cow<'_, SamplePair> {
    if flip {
        std::borrow::Cow::Owned(data[i].flipped())
    } else {
        std::borrow::Cow::Borrowed(&data[i])
    }
}

fn check_finite(v: f64, what: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric(format!("{what} became non-finite")))
    }
}

/// Mean landmark loss of the current warp network over `data` (evaluation mode).
pub fn mean_landmark_loss(model: &mut Restorer, data: &[SamplePair]) -> Result<f64> {
    let mut sum = 0.0;
    for s in data {
        let flow = model.flow(&s.degraded, &s.guide, super::model::INFERENCE_MODE)?;
        sum += loss_landmark(&flow, &s.lm_target, &s.lm_guide)?.0;
    }
    Ok(sum / data.len() as f64)
}

/// Optimize the warp network on the flow loss alone. Returns the mean
/// landmark loss of each epoch (accumulated while training).
pub fn pretrain_warpnet(
    model: &mut Restorer,
    data: &[SamplePair],
    cfg: &TrainConfig,
    observer: &mut dyn FnMut(TrainEvent<'_>),
) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::Config("pretraining needs a nonempty dataset".into()));
    }
    let guided;
    let data = if model.config.ablation == Ablation::RandomGuide {
        guided = with_random_guides(data);
        &guided[..]
    } else {
        data
    };
    let warp = model
        .warp
        .as_mut()
        .ok_or_else(|| Error::Config("this variant has no warp network to pretrain".into()))?;
    let mut opt = Adam::new(cfg.adam);
    let mut means = Vec::with_capacity(cfg.pretrain_epochs);
    for epoch in 0..cfg.pretrain_epochs {
        let mut sum = 0.0;
        for item in epoch_order(cfg, PRETRAIN_SHUFFLE_STREAM, epoch, data.len()) {
            let s = pick(data, item);
            let x = Tensor::concat_channels(&Tensor::from_image(&s.degraded), &Tensor::from_image(&s.guide))?;
            let out = warp.forward(&x, Mode::Train)?;
            let flow = Restorer::flow_from_output(&out)?;
            let fl = loss_flow(&flow, &s.lm_target, &s.lm_guide, &cfg.weights)?;
            check_finite(fl.value, "flow loss")?;
            sum += fl.landmark;
            let g = Tensor::from_vec(1, 2, flow.height, flow.width, fl.grad.to_planar())?;
            warp.backward(&g)?;
            opt.step(warp, cfg.lr[0]);
        }
        let mean = sum / data.len() as f64;
        observer(TrainEvent::PretrainEpoch { epoch, mean_landmark: mean });
        means.push(mean);
    }
    Ok(means)
}

struct Optimizers {
    warp: Adam,
    rec: Adam,
    d_global: Adam,
    d_local: Adam,
}

fn triple(a: &Tensor, b: &Tensor, c: &Tensor) -> Result<Tensor> {
    Tensor::concat_channels(&Tensor::concat_channels(a, b)?, c)
}

/// One discriminator update on a real/fake pair; returns its loss.
fn discriminator_step(d: &mut Discriminator, opt: &mut Adam, real: &Tensor, fake: &Tensor, lr: f64) -> Result<f64> {
    let m_fake = d.forward(fake, Mode::Train)?;
    let m_real = d.forward(real, Mode::Train)?;
    let adv = loss_adversarial(&m_real, &m_fake, Role::Discriminator)?;
    d.backward(&adv.grad_real)?;
    d.forward(fake, Mode::Train)?;
    d.backward(&adv.grad_fake)?;
    opt.step(d, lr);
    Ok(adv.value)
}

/// Generator loss through `d` and its gradient with respect to the candidate channels.
fn generator_signal(d: &mut Discriminator, fake: &Tensor) -> Result<(f64, Tensor)> {
    let m = d.forward(fake, Mode::Train)?;
    let adv = loss_adversarial(&m, &m, Role::Generator)?;
    let g = d.backward(&adv.grad_fake)?;
    d.zero_grad();
    let (_, g_candidate) = g.split_channels(6)?;
    Ok((adv.value, g_candidate))
}

fn crop(hwc: &[f64], s: usize, cf: &FlowField) -> Result<Tensor> {
    Tensor::from_hwc(LOCAL_PATCH, LOCAL_PATCH, 3, &warp_raw(hwc, s, s, 3, cf))
}

fn train_step(
    model: &mut Restorer,
    opt: &mut Optimizers,
    psi: &mut ConvFeatures,
    s: &SamplePair,
    cfg: &TrainConfig,
    lr: f64,
    step: u64,
) -> Result<(LossRecord, f64)> {
    let w = &cfg.weights;
    let size = model.size();
    let ablation = model.config.ablation;
    let d_t = Tensor::from_image(&s.degraded);
    let g_t = Tensor::from_image(&s.guide);
    let target = Tensor::from_image(&s.target);

    let flow = match &mut model.warp {
        Some(warp) => {
            let out = warp.forward(&Tensor::concat_channels(&d_t, &g_t)?, Mode::Train)?;
            Some(Restorer::flow_from_output(&out)?)
        }
        None => None,
    };
    let warped = match &flow {
        Some(f) => warp_bilinear(&s.guide, f),
        None => s.guide.clone(),
    };
    let rec_in = model.rec_input(&d_t, &warped)?;
    let pred = model.rec.forward(&rec_in, Mode::Train)?;
    let pred_hwc = pred.to_hwc(0);

    let adversarial = w.ag > 0.0 || w.al > 0.0;
    let bbox = landmark_bbox(&s.lm_target)?;
    let local_flow = (bbox.area() > 0.0 && w.al > 0.0)
        .then(|| crop_flow(bbox.x0, bbox.y0, bbox.x1, bbox.y1, LOCAL_PATCH, LOCAL_PATCH));

    // Discriminator updates on the detached prediction.
    if adversarial {
        let fake = triple(&d_t, &g_t, &pred)?;
        let real = triple(&d_t, &g_t, &target)?;
        if w.ag > 0.0 {
            discriminator_step(&mut model.d_global, &mut opt.d_global, &real, &fake, lr)?;
        }
        if let Some(cf) = &local_flow {
            let (dc, gc) = (crop(s.degraded.data(), size, cf)?, crop(s.guide.data(), size, cf)?);
            let real = triple(&dc, &gc, &crop(s.target.data(), size, cf)?)?;
            let fake = triple(&dc, &gc, &crop(&pred_hwc, size, cf)?)?;
            discriminator_step(&mut model.d_local, &mut opt.d_local, &real, &fake, lr)?;
        }
    }

    // Generator side.
    let recon = loss_reconstruction(&pred, &target, psi, w)?;
    let mut g_pred = recon.grad;
    let (mut adv_g, mut adv_l) = (0.0, 0.0);
    if adversarial && w.ag > 0.0 {
        let (v, g) = generator_signal(&mut model.d_global, &triple(&d_t, &g_t, &pred)?)?;
        adv_g = v;
        for (a, b) in g_pred.data.iter_mut().zip(&g.data) {
            *a += w.ag * b;
        }
    }
    if let Some(cf) = &local_flow {
        let dc = crop(s.degraded.data(), size, cf)?;
        let gc = crop(s.guide.data(), size, cf)?;
        let (v, g) = generator_signal(&mut model.d_local, &triple(&dc, &gc, &crop(&pred_hwc, size, cf)?)?)?;
        adv_l = v;
        let (g_img, _) = warp_backward_crop(&g.to_hwc(0), &pred_hwc, size, cf);
        let g_img = Tensor::from_hwc(size, size, 3, &g_img)?;
        for (a, b) in g_pred.data.iter_mut().zip(&g_img.data) {
            *a += w.al * b;
        }
    }
    let g_in = model.rec.backward(&g_pred)?;

    let (mut lm, mut tv) = (0.0, 0.0);
    if let (Some(warp), Some(flow)) = (&mut model.warp, &flow) {
        let (_, g_warped) = g_in.split_channels(3)?;
        let (_, mut g_flow) = warp_backward(&g_warped.to_hwc(0), &s.guide, flow)?;
        if ablation.uses_flow_loss() {
            let fl = loss_flow(flow, &s.lm_target, &s.lm_guide, w)?;
            lm = fl.landmark;
            tv = fl.tv;
            for (a, b) in g_flow.phi_x.iter_mut().zip(&fl.grad.phi_x) {
                *a += b;
            }
            for (a, b) in g_flow.phi_y.iter_mut().zip(&fl.grad.phi_y) {
                *a += b;
            }
        }
        warp.backward(&Tensor::from_vec(1, 2, flow.height, flow.width, g_flow.to_planar())?)?;
        opt.warp.step(warp, lr);
    }
    opt.rec.step(&mut model.rec, lr);

    let record = LossRecord::weighted(step, [recon.l2, recon.perceptual, adv_g, adv_l, lm, tv], w);
    check_finite(record.total, "training loss")?;
    Ok((record, recon.value))
}

/// Gradient of a crop with respect to the cropped image (the crop flow is fixed).
fn warp_backward_crop(grad: &[f64], img_hwc: &[f64], size: usize, cf: &FlowField) -> (Vec<f64>, FlowField) {
    crate::warp::warp_backward_raw(grad, img_hwc, size, size, 3, cf)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub steps: u64,
    /// Mean reconstruction loss of every epoch.
    pub epoch_reconstruction: Vec<f64>,
    /// Learning-rate phase used in every epoch.
    pub epoch_phase: Vec<usize>,
}

/// End-to-end training of all networks for `cfg.total_epochs` epochs,
/// alternating one discriminator and one generator update per sample.
pub fn train_full(
    model: &mut Restorer,
    data: &[SamplePair],
    cfg: &TrainConfig,
    observer: &mut dyn FnMut(TrainEvent<'_>),
) -> Result<TrainSummary> {
    if data.is_empty() {
        return Err(Error::Config("training needs a nonempty dataset".into()));
    }
    let guided;
    let data = if model.config.ablation == Ablation::RandomGuide {
        guided = with_random_guides(data);
        &guided[..]
    } else {
        data
    };
    let mut opt = Optimizers {
        warp: Adam::new(cfg.adam),
        rec: Adam::new(cfg.adam),
        d_global: Adam::new(cfg.adam),
        d_local: Adam::new(cfg.adam),
    };
    let mut psi = ConvFeatures::default();
    let mut schedule = PhaseSchedule::new(cfg.lr, cfg.plateau_window, cfg.plateau_tol);
    let mut summary = TrainSummary { steps: 0, epoch_reconstruction: Vec::new(), epoch_phase: Vec::new() };
    for epoch in 0..cfg.total_epochs {
        let lr = schedule.lr();
        let mut sum = 0.0;
        for item in epoch_order(cfg, SHUFFLE_STREAM, epoch, data.len()) {
            let s = pick(data, item);
            let (record, recon) = train_step(model, &mut opt, &mut psi, &s, cfg, lr, summary.steps)?;
            summary.steps += 1;
            sum += recon;
            observer(TrainEvent::Step(&record));
        }
        let mean = sum / data.len() as f64;
        summary.epoch_reconstruction.push(mean);
        summary.epoch_phase.push(schedule.phase());
        observer(TrainEvent::Epoch { epoch, mean_reconstruction: mean, lr, model });
        schedule.end_epoch(mean);
    }
    Ok(summary)
}
