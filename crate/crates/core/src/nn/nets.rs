//! The flow-predicting warp network, the U-Net restoration network, and the
//! patch discriminators.

use super::layers::{ActKind, Activation, BatchNorm, Conv4x4s2, Deconv4x4s2};
use super::{Mode, Module, ParamTensor, Tensor};
use crate::error::{Error, Result};
use crate::image::{pixel_to_norm, Image};
use crate::warp::FlowField;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetConfig {
    pub base_channels: usize,
    pub depth: usize,
    pub input_size: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self { base_channels: 16, depth: 5, input_size: 32 }
    }
}

impl NetConfig {
    pub fn new(base_channels: usize, input_size: usize) -> Result<Self> {
        let depth = input_size.trailing_zeros() as usize;
        let cfg = Self { base_channels, depth, input_size };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_channels == 0 {
            return Err(Error::Config("base_channels must be positive".into()));
        }
        if !self.input_size.is_power_of_two() || self.input_size < 8 {
            return Err(Error::Config(format!(
                "input_size must be a power of two >= 8, got {}",
                self.input_size
            )));
        }
        if 1usize << self.depth != self.input_size {
            return Err(Error::Config(format!(
                "depth {} does not reduce input_size {} to 1x1",
                self.depth, self.input_size
            )));
        }
        Ok(())
    }

    /// Output channels of encoder layer `i`: doubling from `base`, capped at `8 * base`.
    pub fn enc_channels(&self, i: usize) -> usize {
        self.base_channels << i.min(3)
    }
}

#[derive(Debug, Clone)]
pub struct DownBlock {
    pub conv: Conv4x4s2,
    pub bn: Option<BatchNorm>,
    pub act: Activation,
}

impl DownBlock {
    fn new<R: Rng + ?Sized>(name: &str, cin: usize, cout: usize, bn: bool, act: ActKind, rng: &mut R) -> Self {
        Self {
            conv: Conv4x4s2::new(&format!("{name}.conv"), cin, cout, rng),
            bn: bn.then(|| BatchNorm::new(&format!("{name}.bn"), cout)),
            act: Activation::new(act),
        }
    }

    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let mut h = self.conv.forward(x)?;
        if let Some(bn) = &mut self.bn {
            h = bn.forward(&h, mode)?;
        }
        Ok(self.act.forward(&h))
    }

    fn backward(&mut self, g: &Tensor) -> Result<Tensor> {
        let mut g = self.act.backward(g)?;
        if let Some(bn) = &mut self.bn {
            g = bn.backward(&g)?;
        }
        self.conv.backward(&g)
    }
}

#[derive(Debug, Clone)]
pub struct UpBlock {
    pub deconv: Deconv4x4s2,
    pub bn: Option<BatchNorm>,
    pub act: Activation,
}

impl UpBlock {
    fn new<R: Rng + ?Sized>(name: &str, cin: usize, cout: usize, bn: bool, act: ActKind, rng: &mut R) -> Self {
        Self {
            deconv: Deconv4x4s2::new(&format!("{name}.deconv"), cin, cout, rng),
            bn: bn.then(|| BatchNorm::new(&format!("{name}.bn"), cout)),
            act: Activation::new(act),
        }
    }

    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let mut h = self.deconv.forward(x)?;
        if let Some(bn) = &mut self.bn {
            h = bn.forward(&h, mode)?;
        }
        Ok(self.act.forward(&h))
    }

    fn backward(&mut self, g: &Tensor) -> Result<Tensor> {
        let mut g = self.act.backward(g)?;
        if let Some(bn) = &mut self.bn {
            g = bn.backward(&g)?;
        }
        self.deconv.backward(&g)
    }
}

macro_rules! block_module {
    ($ty:ty, $lin:ident) => {
        impl Module for $ty {
            fn params(&self) -> Vec<&ParamTensor> {
                let mut v = self.$lin.params();
                if let Some(bn) = &self.bn {
                    v.extend(bn.params());
                }
                v
            }

            fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
                let mut v = self.$lin.params_mut();
                if let Some(bn) = &mut self.bn {
                    v.extend(bn.params_mut());
                }
                v
            }

            fn buffers(&self) -> Vec<&ParamTensor> {
                self.bn.as_ref().map(|bn| bn.buffers()).unwrap_or_default()
            }

            fn buffers_mut(&mut self) -> Vec<&mut ParamTensor> {
                self.bn.as_mut().map(|bn| bn.buffers_mut()).unwrap_or_default()
            }
        }
    };
}

block_module!(DownBlock, conv);
block_module!(UpBlock, deconv);

fn block_params<'a, B: Module>(blocks: &'a [B], out: &mut Vec<&'a ParamTensor>) {
    out.extend(blocks.iter().flat_map(|b| b.params()));
}

fn block_params_mut<'a, B: Module>(blocks: &'a mut [B], out: &mut Vec<&'a mut ParamTensor>) {
    out.extend(blocks.iter_mut().flat_map(|b| b.params_mut()));
}

fn block_buffers<'a, B: Module>(blocks: &'a [B], out: &mut Vec<&'a ParamTensor>) {
    out.extend(blocks.iter().flat_map(|b| b.buffers()));
}

fn block_buffers_mut<'a, B: Module>(blocks: &'a mut [B], out: &mut Vec<&'a mut ParamTensor>) {
    out.extend(blocks.iter_mut().flat_map(|b| b.buffers_mut()));
}

/// Encoder-decoder shared by the warp and restoration networks. With `skips`
/// the decoder layer `k > 0` sees its predecessor concatenated with encoder
/// layer `depth - 1 - k`, giving the U-Net topology.
#[derive(Debug, Clone)]
struct EncoderDecoder {
    enc: Vec<DownBlock>,
    dec: Vec<UpBlock>,
    skips: bool,
    skip_enabled: Vec<bool>,
    dec_out_ch: Vec<usize>,
}

impl EncoderDecoder {
    fn new<R: Rng + ?Sized>(prefix: &str, cfg: &NetConfig, in_ch: usize, out_ch: usize, skips: bool, rng: &mut R) -> Self {
        let d = cfg.depth;
        let enc_out_ch: Vec<usize> = (0..d).map(|i| cfg.enc_channels(i)).collect();
        let mut enc = Vec::with_capacity(d);
        for i in 0..d {
            let cin = if i == 0 { in_ch } else { enc_out_ch[i - 1] };
            let bn = i != 0 && i != d - 1;
            enc.push(DownBlock::new(&format!("{prefix}.enc{i}"), cin, enc_out_ch[i], bn, ActKind::LeakyRelu, rng));
        }
        let dec_out_ch: Vec<usize> = (0..d).map(|k| if k + 1 < d { enc_out_ch[d - 2 - k] } else { out_ch }).collect();
        let mut dec = Vec::with_capacity(d);
        for k in 0..d {
            let mut cin = if k == 0 { enc_out_ch[d - 1] } else { dec_out_ch[k - 1] };
            if skips && k > 0 {
                cin += enc_out_ch[d - 1 - k];
            }
            let last = k + 1 == d;
            let act = if last { ActKind::Identity } else { ActKind::Relu };
            dec.push(UpBlock::new(&format!("{prefix}.dec{k}"), cin, dec_out_ch[k], !last, act, rng));
        }
        Self { enc, dec, skips, skip_enabled: vec![true; d], dec_out_ch }
    }

    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let d = self.enc.len();
        let mut feats = Vec::with_capacity(d);
        let mut h = x.clone();
        for e in &mut self.enc {
            h = e.forward(&h, mode)?;
            feats.push(h.clone());
        }
        for k in 0..d {
            if self.skips && k > 0 {
                let j = d - 1 - k;
                let skip = if self.skip_enabled[j] {
                    feats[j].clone()
                } else {
                    Tensor::zeros(feats[j].n, feats[j].c, feats[j].h, feats[j].w)
                };
                h = Tensor::concat_channels(&h, &skip)?;
            }
            h = self.dec[k].forward(&h, mode)?;
        }
        Ok(h)
    }

    fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let d = self.enc.len();
        let mut skip_grads: Vec<Option<Tensor>> = vec![None; d];
        let mut g = grad.clone();
        for k in (0..d).rev() {
            g = self.dec[k].backward(&g)?;
            if self.skips && k > 0 {
                let j = d - 1 - k;
                let (gd, gs) = g.split_channels(self.dec_out_ch[k - 1])?;
                if self.skip_enabled[j] {
                    skip_grads[j] = Some(gs);
                }
                g = gd;
            }
        }
        for i in (0..d).rev() {
            if let Some(gs) = skip_grads[i].take() {
                g.add_assign(&gs);
            }
            g = self.enc[i].backward(&g)?;
        }
        Ok(g)
    }

    fn params(&self) -> Vec<&ParamTensor> {
        let mut out = Vec::new();
        block_params(&self.enc, &mut out);
        block_params(&self.dec, &mut out);
        out
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut out = Vec::new();
        block_params_mut(&mut self.enc, &mut out);
        block_params_mut(&mut self.dec, &mut out);
        out
    }

    fn buffers(&self) -> Vec<&ParamTensor> {
        let mut out = Vec::new();
        block_buffers(&self.enc, &mut out);
        block_buffers(&self.dec, &mut out);
        out
    }

    fn buffers_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut out = Vec::new();
        block_buffers_mut(&mut self.enc, &mut out);
        block_buffers_mut(&mut self.dec, &mut out);
        out
    }
}

fn check_pair(deg: &Image, other: &Image, size: usize, what: &str) -> Result<()> {
    for im in [deg, other] {
        if im.height() != size || im.width() != size || im.channels() != 3 {
            return Err(Error::Shape(format!(
                "{what} expects {size}x{size} RGB inputs, got {}x{}x{}",
                im.height(),
                im.width(),
                im.channels()
            )));
        }
    }
    Ok(())
}

/// Predicts a backward flow field from the degraded observation and the guide.
/// Plain encoder-decoder without skips; the final layer adds a learned
/// per-pixel bias before `tanh`, initialized so the starting flow is close to
/// the identity sampling grid.
#[derive(Debug, Clone)]
pub struct WarpNet {
    pub config: NetConfig,
    body: EncoderDecoder,
    pub flow_bias: ParamTensor,
    out_act: Activation,
}

impl WarpNet {
    pub const IN_CHANNELS: usize = 6;

    pub fn new<R: Rng + ?Sized>(config: NetConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let body = EncoderDecoder::new("warpnet", &config, Self::IN_CHANNELS, 2, false, rng);
        let s = config.input_size;
        let mut bias = vec![0.0; 2 * s * s];
        for y in 0..s {
            for x in 0..s {
                bias[y * s + x] = pixel_to_norm(x as f64, s).atanh();
                bias[s * s + y * s + x] = pixel_to_norm(y as f64, s).atanh();
            }
        }
        Ok(Self {
            config,
            body,
            flow_bias: ParamTensor::new("warpnet.flow_bias", &[2, s, s], bias),
            out_act: Activation::new(ActKind::Tanh),
        })
    }

    /// `x`: `n x 6 x S x S` (degraded then guide). Returns `n x 2 x S x S` flow (x then y).
    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let s = self.config.input_size;
        if x.c != Self::IN_CHANNELS || x.h != s || x.w != s {
            return Err(Error::Shape(format!("warpnet expects nx6x{s}x{s}, got {:?}", x.shape())));
        }
        let mut z = self.body.forward(x, mode)?;
        let per = 2 * s * s;
        for k in 0..z.n {
            for (v, b) in z.data[k * per..(k + 1) * per].iter_mut().zip(&self.flow_bias.values) {
                *v += b;
            }
        }
        Ok(self.out_act.forward(&z))
    }

    pub fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let gz = self.out_act.backward(grad)?;
        let per = self.flow_bias.len();
        for k in 0..gz.n {
            for (gb, g) in self.flow_bias.grad.iter_mut().zip(&gz.data[k * per..(k + 1) * per]) {
                *gb += g;
            }
        }
        self.body.backward(&gz)
    }

    pub fn predict_flow(&mut self, degraded: &Image, guide: &Image, mode: Mode) -> Result<FlowField> {
        check_pair(degraded, guide, self.config.input_size, "warpnet")?;
        let x = Tensor::concat_channels(&Tensor::from_image(degraded), &Tensor::from_image(guide))?;
        let y = self.forward(&x, mode)?;
        flow_from_tensor(&y, 0)
    }
}

/// Sample `k` of an `n x 2 x H x W` tensor as a flow field.
pub fn flow_from_tensor(t: &Tensor, k: usize) -> Result<FlowField> {
    if t.c != 2 || k >= t.n {
        return Err(Error::Shape(format!("flow tensor {:?}, sample {k}", t.shape())));
    }
    let per = 2 * t.plane();
    FlowField::from_planar(t.h, t.w, &t.data[k * per..(k + 1) * per])
}

impl Module for WarpNet {
    fn params(&self) -> Vec<&ParamTensor> {
        let mut p = self.body.params();
        p.push(&self.flow_bias);
        p
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut p = self.body.params_mut();
        p.push(&mut self.flow_bias);
        p
    }

    fn buffers(&self) -> Vec<&ParamTensor> {
        self.body.buffers()
    }

    fn buffers_mut(&mut self) -> Vec<&mut ParamTensor> {
        self.body.buffers_mut()
    }
}

/// U-Net mapping the degraded image (and, normally, the warped guide) to the
/// restored image in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct RecNet {
    pub config: NetConfig,
    pub in_channels: usize,
    body: EncoderDecoder,
    out_act: Activation,
}

impl RecNet {
    /// `in_channels` is 6 for degraded + warped guide, 3 for the degraded image alone.
    pub fn new<R: Rng + ?Sized>(config: NetConfig, in_channels: usize, rng: &mut R) -> Result<Self> {
        config.validate()?;
        if in_channels == 0 {
            return Err(Error::Config("recnet needs at least one input channel".into()));
        }
        Ok(Self {
            config,
            in_channels,
            body: EncoderDecoder::new("recnet", &config, in_channels, 3, true, rng),
            out_act: Activation::new(ActKind::Tanh),
        })
    }

    /// Disable (or re-enable) the skip carrying encoder layer `level`; a disabled skip feeds zeros.
    pub fn set_skip(&mut self, level: usize, enabled: bool) {
        if level < self.body.skip_enabled.len() {
            self.body.skip_enabled[level] = enabled;
        }
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let s = self.config.input_size;
        if x.c != self.in_channels || x.h != s || x.w != s {
            return Err(Error::Shape(format!(
                "recnet expects nx{}x{s}x{s}, got {:?}",
                self.in_channels,
                x.shape()
            )));
        }
        let z = self.body.forward(x, mode)?;
        let mut y = self.out_act.forward(&z);
        y.data.iter_mut().for_each(|v| *v = 0.5 * (*v + 1.0));
        Ok(y)
    }

    pub fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let mut g = grad.clone();
        g.data.iter_mut().for_each(|v| *v *= 0.5);
        let g = self.out_act.backward(&g)?;
        self.body.backward(&g)
    }

    /// Restore one image. `warped` is ignored when the network takes only the degraded input.
    pub fn restore(&mut self, degraded: &Image, warped: &Image, mode: Mode) -> Result<Image> {
        check_pair(degraded, warped, self.config.input_size, "recnet")?;
        let d = Tensor::from_image(degraded);
        let x = if self.in_channels == 3 {
            d
        } else {
            Tensor::concat_channels(&d, &Tensor::from_image(warped))?
        };
        self.forward(&x, mode)?.to_image(0)
    }
}

impl Module for RecNet {
    fn params(&self) -> Vec<&ParamTensor> {
        self.body.params()
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        self.body.params_mut()
    }

    fn buffers(&self) -> Vec<&ParamTensor> {
        self.body.buffers()
    }

    fn buffers_mut(&mut self) -> Vec<&mut ParamTensor> {
        self.body.buffers_mut()
    }
}

/// Patch discriminator over (observation, guide, candidate): three stride-2
/// blocks ending in a one-channel sigmoid map at 1/8 resolution.
#[derive(Debug, Clone)]
pub struct Discriminator {
    blocks: Vec<DownBlock>,
}

impl Discriminator {
    pub const IN_CHANNELS: usize = 9;

    pub fn new<R: Rng + ?Sized>(name: &str, base_channels: usize, rng: &mut R) -> Self {
        let b = base_channels.max(1);
        Self {
            blocks: vec![
                DownBlock::new(&format!("{name}.b0"), Self::IN_CHANNELS, b, false, ActKind::LeakyRelu, rng),
                DownBlock::new(&format!("{name}.b1"), b, 2 * b, true, ActKind::LeakyRelu, rng),
                DownBlock::new(&format!("{name}.b2"), 2 * b, 1, false, ActKind::Sigmoid, rng),
            ],
        }
    }

    /// `x`: `n x 9 x H x W` with `H, W` multiples of 8.
    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        if x.c != Self::IN_CHANNELS || x.h % 8 != 0 || x.w % 8 != 0 || x.h == 0 || x.w == 0 {
            return Err(Error::Shape(format!(
                "discriminator expects nx9xHxW with H, W multiples of 8, got {:?}",
                x.shape()
            )));
        }
        let mut h = x.clone();
        for b in &mut self.blocks {
            h = b.forward(&h, mode)?;
        }
        Ok(h)
    }

    pub fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let mut g = grad.clone();
        for b in self.blocks.iter_mut().rev() {
            g = b.backward(&g)?;
        }
        Ok(g)
    }

    pub fn probability_map(&mut self, obs: &Image, guide: &Image, candidate: &Image, mode: Mode) -> Result<Tensor> {
        if !obs.same_shape(guide) || !obs.same_shape(candidate) || obs.channels() != 3 {
            return Err(Error::Shape("discriminator inputs must be equal-size RGB images".into()));
        }
        let x = Tensor::concat_channels(
            &Tensor::concat_channels(&Tensor::from_image(obs), &Tensor::from_image(guide))?,
            &Tensor::from_image(candidate),
        )?;
        self.forward(&x, mode)
    }
}

impl Module for Discriminator {
    fn params(&self) -> Vec<&ParamTensor> {
        let mut out = Vec::new();
        block_params(&self.blocks, &mut out);
        out
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut out = Vec::new();
        block_params_mut(&mut self.blocks, &mut out);
        out
    }

    fn buffers(&self) -> Vec<&ParamTensor> {
        let mut out = Vec::new();
        block_buffers(&self.blocks, &mut out);
        out
    }

    fn buffers_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut out = Vec::new();
        block_buffers_mut(&mut self.blocks, &mut out);
        out
    }
}

/// Closed-form parameter counts, used to pin the architecture in tests.
pub fn warpnet_param_count(cfg: &NetConfig) -> usize {
    encdec_param_count(cfg, WarpNet::IN_CHANNELS, 2, false) + 2 * cfg.input_size * cfg.input_size
}

pub fn recnet_param_count(cfg: &NetConfig, in_channels: usize) -> usize {
    encdec_param_count(cfg, in_channels, 3, true)
}

pub fn discriminator_param_count(base: usize) -> usize {
    let b = base.max(1);
    let conv = |i: usize, o: usize| 16 * i * o + o;
    conv(9, b) + conv(b, 2 * b) + 2 * 2 * b + conv(2 * b, 1)
}

fn encdec_param_count(cfg: &NetConfig, in_ch: usize, out_ch: usize, skips: bool) -> usize {
    let d = cfg.depth;
    let e: Vec<usize> = (0..d).map(|i| cfg.enc_channels(i)).collect();
    let mut total = 0;
    for i in 0..d {
        let cin = if i == 0 { in_ch } else { e[i - 1] };
        total += 16 * cin * e[i] + e[i];
        if i != 0 && i != d - 1 {
            total += 2 * e[i];
        }
    }
    for k in 0..d {
        let mut cin = if k == 0 { e[d - 1] } else { e[d - 1 - k] };
        if skips && k > 0 {
            cin += e[d - 1 - k];
        }
        let cout = if k + 1 < d { e[d - 2 - k] } else { out_ch };
        total += 16 * cin * cout + cout;
        if k + 1 < d {
            total += 2 * cout;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> NetConfig {
        NetConfig::new(4, 16).unwrap()
    }

    #[test]
    fn config_validation() {
        assert_eq!(NetConfig::default(), NetConfig::new(16, 32).unwrap());
        assert!(NetConfig { base_channels: 16, depth: 4, input_size: 32 }.validate().is_err());
        assert!(NetConfig::new(16, 24).is_err());
        assert!(NetConfig::new(0, 32).is_err());
        let c = NetConfig::default();
        let widths: Vec<usize> = (0..5).map(|i| c.enc_channels(i)).collect();
        assert_eq!(widths, vec![16, 32, 64, 128, 128]);
    }

    #[test]
    fn parameter_counts_match_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for cfg in [tiny(), NetConfig::default()] {
            let w = WarpNet::new(cfg, &mut rng).unwrap();
            assert_eq!(w.param_count(), warpnet_param_count(&cfg));
            let r = RecNet::new(cfg, 6, &mut rng).unwrap();
            assert_eq!(r.param_count(), recnet_param_count(&cfg, 6));
            let r3 = RecNet::new(cfg, 3, &mut rng).unwrap();
            assert_eq!(r3.param_count(), recnet_param_count(&cfg, 3));
        }
        let d = Discriminator::new("d", 16, &mut rng);
        assert_eq!(d.param_count(), discriminator_param_count(16));
    }

    #[test]
    fn parameter_names_unique() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = RecNet::new(tiny(), 6, &mut rng).unwrap();
        let mut names: Vec<&str> = r.params().iter().chain(r.buffers().iter()).map(|p| p.name.as_str()).collect();
        let n = names.len();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), n);
    }

    #[test]
    fn warpnet_starts_near_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = tiny();
        let mut net = WarpNet::new(cfg, &mut rng).unwrap();
        let img = Image::from_fn(16, 16, 3, |i, j, c| ((i * 3 + j * 5 + c) % 7) as f64 / 7.0);
        let flow = net.predict_flow(&img, &img, Mode::Train).unwrap();
        assert_eq!((flow.height, flow.width), (16, 16));
        let id = crate::warp::flow_identity(16, 16);
        let bias_flow: Vec<f64> = net.flow_bias.values.iter().map(|b| b.tanh()).collect();
        let id_planar = id.to_planar();
        assert!(bias_flow.iter().zip(&id_planar).all(|(a, b)| (a - b).abs() < 1e-12));
        let devs: Vec<f64> = flow.to_planar().iter().zip(&id_planar).map(|(a, b)| (a - b).abs()).collect();
        let mean_dev = devs.iter().sum::<f64>() / devs.len() as f64;
        assert!(mean_dev < 0.1, "initial flow deviates by {mean_dev} on average");
        assert!(flow.phi_x.iter().chain(&flow.phi_y).all(|v| v.abs() < 1.0));
    }

    #[test]
    fn recnet_output_range_and_live_skips() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = RecNet::new(tiny(), 6, &mut rng).unwrap();
        let x = Tensor::randn(2, 6, 16, 16, 1.0, &mut rng);
        let y = net.forward(&x, Mode::Train).unwrap();
        assert_eq!(y.shape(), [2, 3, 16, 16]);
        assert!(y.data.iter().all(|&v| (0.0..=1.0).contains(&v)));
        for level in 0..3 {
            net.set_skip(level, false);
            let z = net.forward(&x, Mode::Train).unwrap();
            net.set_skip(level, true);
            assert_ne!(y.data, z.data, "skip at level {level} had no effect");
        }
    }

    #[test]
    fn discriminator_range_and_batch_independence() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut d = Discriminator::new("d", 4, &mut rng);
        let a = Tensor::randn(1, 9, 16, 16, 1.0, &mut rng);
        let b = Tensor::randn(1, 9, 16, 16, 1.0, &mut rng);
        let ab = Tensor { n: 2, c: 9, h: 16, w: 16, data: [a.data.clone(), b.data.clone()].concat() };
        let ba = Tensor { n: 2, c: 9, h: 16, w: 16, data: [b.data, a.data].concat() };
        let y1 = d.forward(&ab, Mode::Eval).unwrap();
        let y2 = d.forward(&ba, Mode::Eval).unwrap();
        assert_eq!(y1.shape(), [2, 1, 2, 2]);
        assert!(y1.data.iter().all(|&v| v > 0.0 && v < 1.0));
        assert_eq!(&y1.data[..4], &y2.data[4..]);
        assert_eq!(&y1.data[4..], &y2.data[..4]);
    }

    #[test]
    fn wrong_input_size_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut w = WarpNet::new(tiny(), &mut rng).unwrap();
        let small = Image::zeros(8, 8, 3);
        assert!(w.predict_flow(&small, &small, Mode::Eval).is_err());
        let mut r = RecNet::new(tiny(), 6, &mut rng).unwrap();
        assert!(r.restore(&small, &small, Mode::Eval).is_err());
    }
}
