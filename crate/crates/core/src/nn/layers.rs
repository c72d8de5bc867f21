//! Layer family: 4x4 stride-2 convolution and transposed convolution,
//! batch normalization, and pointwise activations.

use super::{Mode, Module, ParamTensor, Tensor};
use crate::error::{Error, Result};
use rand::Rng;

pub const KERNEL: usize = 4;
pub const INIT_STD: f64 = 0.02;

/// 4x4 convolution, stride 2, padding 1: halves the spatial size.
#[derive(Debug, Clone)]
pub struct Conv4x4s2 {
    pub in_ch: usize,
    pub out_ch: usize,
    /// `[out, in, 4, 4]`
    pub weight: ParamTensor,
    pub bias: ParamTensor,
    /// Unfolded input of every batch item.
    cols: Option<(Vec<f64>, [usize; 4])>,
}

/// Valid output range `[lo, hi)` for input index `2 * o - 1 + k` to land in `[0, len)`.
#[inline]
fn out_range(k: usize, in_len: usize, out_len: usize) -> (usize, usize) {
    // 2o - 1 + k >= 0  <=>  o >= (1 - k) / 2
    let lo = if k == 0 { 1 } else { 0 };
    // 2o - 1 + k <= in_len - 1  <=>  o <= (in_len - k) / 2
    let hi = ((in_len + 2 - k) / 2).min(out_len);
    (lo, hi.max(lo))
}

/// Unfold `c` planes of `h x w` into a `[c * 16, (h / 2) * (w / 2)]` matrix:
/// row `ci * 16 + kh * 4 + kw`, column `oy * (w / 2) + ox` holds the sample at
/// `(2 oy + kh - 1, 2 ox + kw - 1)`, or zero in the padding.
fn im2col(src: &[f64], c: usize, h: usize, w: usize, cols: &mut [f64]) {
    let (oh, ow) = (h / 2, w / 2);
    let p = oh * ow;
    cols.iter_mut().for_each(|v| *v = 0.0);
    for ci in 0..c {
        let plane = &src[ci * h * w..(ci + 1) * h * w];
        for kh in 0..KERNEL {
            let (oy0, oy1) = out_range(kh, h, oh);
            for kw in 0..KERNEL {
                let (ox0, ox1) = out_range(kw, w, ow);
                let row = &mut cols[(ci * 16 + kh * 4 + kw) * p..(ci * 16 + kh * 4 + kw + 1) * p];
                for oy in oy0..oy1 {
                    let srow = &plane[(2 * oy + kh - 1) * w..];
                    let drow = &mut row[oy * ow..(oy + 1) * ow];
                    for ox in ox0..ox1 {
                        drow[ox] = srow[2 * ox + kw - 1];
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-add the columns back onto the planes.
fn col2im(cols: &[f64], c: usize, h: usize, w: usize, dst: &mut [f64]) {
    let (oh, ow) = (h / 2, w / 2);
    let p = oh * ow;
    for ci in 0..c {
        let plane = &mut dst[ci * h * w..(ci + 1) * h * w];
        for kh in 0..KERNEL {
            let (oy0, oy1) = out_range(kh, h, oh);
            for kw in 0..KERNEL {
                let (ox0, ox1) = out_range(kw, w, ow);
                let row = &cols[(ci * 16 + kh * 4 + kw) * p..(ci * 16 + kh * 4 + kw + 1) * p];
                for oy in oy0..oy1 {
                    let base = (2 * oy + kh - 1) * w + kw;
                    let srow = &row[oy * ow..(oy + 1) * ow];
                    for ox in ox0..ox1 {
                        plane[base + 2 * ox - 1] += srow[ox];
                    }
                }
            }
        }
    }
}

/// `c (m x n) = beta * c + a * b` where `a` is `m x k` and `b` is `k x n`;
/// the `t` flags read the stored row-major operand transposed.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], ta: bool, b: &[f64], tb: bool, beta: f64, c: &mut [f64]) {
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: the slices hold at least m*k, k*n and m*n elements and the
    // strides above address exactly those row-major (or transposed) layouts.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl Conv4x4s2 {
    pub fn new<R: Rng + ?Sized>(name: &str, in_ch: usize, out_ch: usize, rng: &mut R) -> Self {
        Self {
            in_ch,
            out_ch,
            weight: ParamTensor::gaussian(format!("{name}.weight"), &[out_ch, in_ch, KERNEL, KERNEL], INIT_STD, rng),
            bias: ParamTensor::filled(format!("{name}.bias"), &[out_ch], 0.0),
            cols: None,
        }
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        if x.c != self.in_ch || x.h % 2 != 0 || x.w % 2 != 0 || x.h < 2 || x.w < 2 {
            return Err(Error::Shape(format!(
                "conv expects {} channels with even spatial size, got {:?}",
                self.in_ch,
                x.shape()
            )));
        }
        let (oh, ow) = (x.h / 2, x.w / 2);
        let (ip, op, k) = (x.plane(), oh * ow, self.in_ch * 16);
        let mut out = Tensor::zeros(x.n, self.out_ch, oh, ow);
        let mut cols = vec![0.0; x.n * k * op];
        for n in 0..x.n {
            let c = &mut cols[n * k * op..(n + 1) * k * op];
            im2col(&x.data[n * self.in_ch * ip..(n + 1) * self.in_ch * ip], self.in_ch, x.h, x.w, c);
            let dst = &mut out.data[n * self.out_ch * op..(n + 1) * self.out_ch * op];
            for (oc, plane) in dst.chunks_mut(op).enumerate() {
                plane.iter_mut().for_each(|v| *v = self.bias.values[oc]);
            }
            gemm(self.out_ch, k, op, &self.weight.values, false, c, false, 1.0, dst);
        }
        self.cols = Some((cols, x.shape()));
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let (cols, shape) = self.cols.take().ok_or_else(|| Error::Shape("conv backward without forward".into()))?;
        let [bn, c, h, w] = shape;
        let (oh, ow) = (h / 2, w / 2);
        grad_out.check_shape([bn, self.out_ch, oh, ow], "conv backward")?;
        let (ip, op, k) = (h * w, oh * ow, c * 16);
        let mut gx = Tensor::zeros(bn, c, h, w);
        let mut gcols = vec![0.0; k * op];
        for n in 0..bn {
            let go = &grad_out.data[n * self.out_ch * op..(n + 1) * self.out_ch * op];
            for (oc, plane) in go.chunks(op).enumerate() {
                self.bias.grad[oc] += plane.iter().sum::<f64>();
            }
            let col = &cols[n * k * op..(n + 1) * k * op];
            gemm(self.out_ch, op, k, go, false, col, true, 1.0, &mut self.weight.grad);
            gemm(k, self.out_ch, op, &self.weight.values, true, go, false, 0.0, &mut gcols);
            col2im(&gcols, c, h, w, &mut gx.data[n * c * ip..(n + 1) * c * ip]);
        }
        Ok(gx)
    }
}

impl Module for Conv4x4s2 {
    fn params(&self) -> Vec<&ParamTensor> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// 4x4 transposed convolution, stride 2, padding 1: doubles the spatial size.
#[derive(Debug, Clone)]
pub struct Deconv4x4s2 {
    pub in_ch: usize,
    pub out_ch: usize,
    /// `[in, out, 4, 4]`
    pub weight: ParamTensor,
    pub bias: ParamTensor,
    input: Option<Tensor>,
}

impl Deconv4x4s2 {
    pub fn new<R: Rng + ?Sized>(name: &str, in_ch: usize, out_ch: usize, rng: &mut R) -> Self {
        Self {
            in_ch,
            out_ch,
            weight: ParamTensor::gaussian(format!("{name}.weight"), &[in_ch, out_ch, KERNEL, KERNEL], INIT_STD, rng),
            bias: ParamTensor::filled(format!("{name}.bias"), &[out_ch], 0.0),
            input: None,
        }
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        if x.c != self.in_ch {
            return Err(Error::Shape(format!(
                "deconv expects {} channels, got {:?}",
                self.in_ch,
                x.shape()
            )));
        }
        let (oh, ow) = (2 * x.h, 2 * x.w);
        let (ip, op, k) = (x.plane(), oh * ow, self.out_ch * 16);
        let mut out = Tensor::zeros(x.n, self.out_ch, oh, ow);
        let mut cols = vec![0.0; k * ip];
        for n in 0..x.n {
            let src = &x.data[n * self.in_ch * ip..(n + 1) * self.in_ch * ip];
            gemm(k, self.in_ch, ip, &self.weight.values, true, src, false, 0.0, &mut cols);
            let dst = &mut out.data[n * self.out_ch * op..(n + 1) * self.out_ch * op];
            for (oc, plane) in dst.chunks_mut(op).enumerate() {
                plane.iter_mut().for_each(|v| *v = self.bias.values[oc]);
            }
            col2im(&cols, self.out_ch, oh, ow, dst);
        }
        self.input = Some(x.clone());
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let x = self.input.take().ok_or_else(|| Error::Shape("deconv backward without forward".into()))?;
        let (oh, ow) = (2 * x.h, 2 * x.w);
        grad_out.check_shape([x.n, self.out_ch, oh, ow], "deconv backward")?;
        let (ip, op, k) = (x.plane(), oh * ow, self.out_ch * 16);
        let mut gx = Tensor::zeros(x.n, x.c, x.h, x.w);
        let mut gcols = vec![0.0; k * ip];
        for n in 0..x.n {
            let go = &grad_out.data[n * self.out_ch * op..(n + 1) * self.out_ch * op];
            for (oc, plane) in go.chunks(op).enumerate() {
                self.bias.grad[oc] += plane.iter().sum::<f64>();
            }
            im2col(go, self.out_ch, oh, ow, &mut gcols);
            let src = &x.data[n * self.in_ch * ip..(n + 1) * self.in_ch * ip];
            gemm(self.in_ch, ip, k, src, false, &gcols, true, 1.0, &mut self.weight.grad);
            let gdst = &mut gx.data[n * self.in_ch * ip..(n + 1) * self.in_ch * ip];
            gemm(self.in_ch, k, ip, &self.weight.values, false, &gcols, false, 0.0, gdst);
        }
        Ok(gx)
    }
}

impl Module for Deconv4x4s2 {
    fn params(&self) -> Vec<&ParamTensor> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![&mut self.weight, &mut self.bias]
    }
}

pub const BN_MOMENTUM: f64 = 0.9;
pub const BN_EPS: f64 = 1e-5;

/// Per-channel batch normalization with running averages for evaluation.
#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub channels: usize,
    pub gamma: ParamTensor,
    pub beta: ParamTensor,
    pub running_mean: ParamTensor,
    pub running_var: ParamTensor,
    cache: Option<BnCache>,
}

#[derive(Debug, Clone)]
struct BnCache {
    mode: Mode,
    xhat: Tensor,
    inv_std: Vec<f64>,
}

impl BatchNorm {
    pub fn new(name: &str, channels: usize) -> Self {
        Self {
            channels,
            gamma: ParamTensor::filled(format!("{name}.gamma"), &[channels], 1.0),
            beta: ParamTensor::filled(format!("{name}.beta"), &[channels], 0.0),
            running_mean: ParamTensor::filled(format!("{name}.running_mean"), &[channels], 0.0),
            running_var: ParamTensor::filled(format!("{name}.running_var"), &[channels], 1.0),
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        if x.c != self.channels {
            return Err(Error::Shape(format!(
                "batchnorm expects {} channels, got {:?}",
                self.channels,
                x.shape()
            )));
        }
        if x.n < 1 {
            return Err(Error::Shape("batchnorm on an empty batch".into()));
        }
        let p = x.plane();
        let m = (x.n * p) as f64;
        let mut xhat = Tensor::zeros(x.n, x.c, x.h, x.w);
        let mut out = Tensor::zeros(x.n, x.c, x.h, x.w);
        let mut inv_std = vec![0.0; x.c];
        for c in 0..x.c {
            let (mean, var) = match mode {
                Mode::Train | Mode::Infer => {
                    let mut s = 0.0;
                    for n in 0..x.n {
                        s += x.data[(n * x.c + c) * p..(n * x.c + c + 1) * p].iter().sum::<f64>();
                    }
                    let mean = s / m;
                    let mut v = 0.0;
                    for n in 0..x.n {
                        v += x.data[(n * x.c + c) * p..(n * x.c + c + 1) * p]
                            .iter()
                            .map(|a| (a - mean) * (a - mean))
                            .sum::<f64>();
                    }
                    let var = v / m;
                    if mode == Mode::Train {
                        let unbiased = if m > 1.0 { v / (m - 1.0) } else { var };
                        self.running_mean.values[c] =
                            BN_MOMENTUM * self.running_mean.values[c] + (1.0 - BN_MOMENTUM) * mean;
                        self.running_var.values[c] =
                            BN_MOMENTUM * self.running_var.values[c] + (1.0 - BN_MOMENTUM) * unbiased;
                    }
                    (mean, var)
                }
                Mode::Eval => (self.running_mean.values[c], self.running_var.values[c]),
            };
            let is = 1.0 / (var + BN_EPS).sqrt();
            inv_std[c] = is;
            let (g, b) = (self.gamma.values[c], self.beta.values[c]);
            for n in 0..x.n {
                let base = (n * x.c + c) * p;
                for k in base..base + p {
                    let xh = (x.data[k] - mean) * is;
                    xhat.data[k] = xh;
                    out.data[k] = g * xh + b;
                }
            }
        }
        self.cache = Some(BnCache { mode, xhat, inv_std });
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let cache = self.cache.take().ok_or_else(|| Error::Shape("batchnorm backward without forward".into()))?;
        let xhat = &cache.xhat;
        grad_out.check_shape(xhat.shape(), "batchnorm backward")?;
        let p = xhat.plane();
        let m = (xhat.n * p) as f64;
        let mut gx = Tensor::zeros(xhat.n, xhat.c, xhat.h, xhat.w);
        for c in 0..xhat.c {
            let (mut sum_g, mut sum_gx) = (0.0, 0.0);
            for n in 0..xhat.n {
                let base = (n * xhat.c + c) * p;
                for k in base..base + p {
                    sum_g += grad_out.data[k];
                    sum_gx += grad_out.data[k] * xhat.data[k];
                }
            }
            self.beta.grad[c] += sum_g;
            self.gamma.grad[c] += sum_gx;
            let g = self.gamma.values[c];
            let is = cache.inv_std[c];
            for n in 0..xhat.n {
                let base = (n * xhat.c + c) * p;
                for k in base..base + p {
                    gx.data[k] = match cache.mode {
                        Mode::Train | Mode::Infer => g * is / m * (m * grad_out.data[k] - sum_g - xhat.data[k] * sum_gx),
                        Mode::Eval => g * is * grad_out.data[k],
                    };
                }
            }
        }
        Ok(gx)
    }
}

impl Module for BatchNorm {
    fn params(&self) -> Vec<&ParamTensor> {
        vec![&self.gamma, &self.beta]
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![&mut self.gamma, &mut self.beta]
    }

    fn buffers(&self) -> Vec<&ParamTensor> {
        vec![&self.running_mean, &self.running_var]
    }

    fn buffers_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![&mut self.running_mean, &mut self.running_var]
    }
}

pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActKind {
    Identity,
    Relu,
    LeakyRelu,
    Tanh,
    Sigmoid,
}

/// Pointwise activation; caches its input (ReLU family) or output (tanh, sigmoid).
#[derive(Debug, Clone)]
pub struct Activation {
    pub kind: ActKind,
    cache: Option<Tensor>,
}

impl Activation {
    pub fn new(kind: ActKind) -> Self {
        Self { kind, cache: None }
    }

    pub fn forward(&mut self, x: &Tensor) -> Tensor {
        let mut out = x.clone();
        match self.kind {
            ActKind::Identity => {}
            ActKind::Relu => out.data.iter_mut().for_each(|v| *v = v.max(0.0)),
            ActKind::LeakyRelu => out
                .data
                .iter_mut()
                .for_each(|v| *v = if *v > 0.0 { *v } else { LEAKY_SLOPE * *v }),
            ActKind::Tanh => out.data.iter_mut().for_each(|v| *v = v.tanh()),
            ActKind::Sigmoid => out.data.iter_mut().for_each(|v| *v = sigmoid(*v)),
        }
        self.cache = Some(match self.kind {
            ActKind::Tanh | ActKind::Sigmoid => out.clone(),
            _ => x.clone(),
        });
        out
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let c = self.cache.take().ok_or_else(|| Error::Shape("activation backward without forward".into()))?;
        grad_out.check_shape(c.shape(), "activation backward")?;
        let mut g = grad_out.clone();
        for (gv, &cv) in g.data.iter_mut().zip(&c.data) {
            *gv *= match self.kind {
                ActKind::Identity => 1.0,
                ActKind::Relu => {
                    if cv > 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
                ActKind::LeakyRelu => {
                    if cv > 0.0 {
                        1.0
                    } else {
                        LEAKY_SLOPE
                    }
                }
                ActKind::Tanh => 1.0 - cv * cv,
                ActKind::Sigmoid => cv * (1.0 - cv),
            };
        }
        Ok(g)
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn relu_all_negative() {
        let x = Tensor::from_vec(1, 1, 1, 3, vec![-1.0, -0.5, -3.0]).unwrap();
        let mut a = Activation::new(ActKind::Relu);
        assert!(a.forward(&x).data.iter().all(|&v| v == 0.0));
        let g = a.backward(&Tensor::from_vec(1, 1, 1, 3, vec![1.0; 3]).unwrap()).unwrap();
        assert!(g.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conv_single_tap_samples_even_positions() {
        // Weight at (kh, kw) = (1, 1) reads input (2 oy, 2 ox).
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut conv = Conv4x4s2::new("c", 1, 1, &mut rng);
        conv.weight.values.iter_mut().for_each(|v| *v = 0.0);
        conv.weight.values[4 + 1] = 1.0;
        let x = Tensor::from_vec(1, 1, 4, 4, (0..16).map(|v| v as f64).collect()).unwrap();
        let y = conv.forward(&x).unwrap();
        assert_eq!(y.data, vec![0.0, 2.0, 8.0, 10.0]);
    }

    #[test]
    fn conv_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut conv = Conv4x4s2::new("c", 2, 3, &mut rng);
        conv.bias.values = vec![0.1, -0.2, 0.3];
        let x = Tensor::randn(2, 2, 6, 8, 1.0, &mut rng);
        let y = conv.forward(&x).unwrap();
        for n in 0..2 {
            for oc in 0..3 {
                for oy in 0..3 {
                    for ox in 0..4 {
                        let mut s = conv.bias.values[oc];
                        for ic in 0..2 {
                            for kh in 0..4 {
                                for kw in 0..4 {
                                    let iy = 2 * oy as isize - 1 + kh as isize;
                                    let ix = 2 * ox as isize - 1 + kw as isize;
                                    if iy < 0 || ix < 0 || iy >= 6 || ix >= 8 {
                                        continue;
                                    }
                                    s += conv.weight.values[((oc * 2 + ic) * 4 + kh) * 4 + kw]
                                        * x.data[((n * 2 + ic) * 6 + iy as usize) * 8 + ix as usize];
                                }
                            }
                        }
                        let got = y.data[((n * 3 + oc) * 3 + oy) * 4 + ox];
                        assert!((got - s).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn deconv_matches_scatter_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut de = Deconv4x4s2::new("d", 2, 2, &mut rng);
        let x = Tensor::randn(1, 2, 3, 2, 1.0, &mut rng);
        let y = de.forward(&x).unwrap();
        let mut expect = vec![0.0; 2 * 6 * 4];
        for ic in 0..2 {
            for oc in 0..2 {
                for iy in 0..3 {
                    for ix in 0..2 {
                        for kh in 0..4 {
                            for kw in 0..4 {
                                let oy = 2 * iy as isize - 1 + kh as isize;
                                let ox = 2 * ix as isize - 1 + kw as isize;
                                if oy < 0 || ox < 0 || oy >= 6 || ox >= 4 {
                                    continue;
                                }
                                expect[(oc * 6 + oy as usize) * 4 + ox as usize] +=
                                    de.weight.values[((ic * 2 + oc) * 4 + kh) * 4 + kw] * x.data[(ic * 3 + iy) * 2 + ix];
                            }
                        }
                    }
                }
            }
        }
        for (a, b) in y.data.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn batchnorm_normalizes_in_training() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut bn = BatchNorm::new("bn", 2);
        let x = Tensor::randn(3, 2, 4, 4, 2.0, &mut rng);
        let y = bn.forward(&x, Mode::Train).unwrap();
        for c in 0..2 {
            let vals: Vec<f64> = (0..3).flat_map(|n| y.data[(n * 2 + c) * 16..(n * 2 + c + 1) * 16].to_vec()).collect();
            let mean = vals.iter().sum::<f64>() / 48.0;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 48.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-3);
        }
        assert!(bn.running_mean.values.iter().any(|&v| v != 0.0));
        assert!(bn.forward(&Tensor::zeros(0, 2, 4, 4), Mode::Train).is_err());
    }

    #[test]
    fn shape_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut conv = Conv4x4s2::new("c", 3, 4, &mut rng);
        assert!(conv.forward(&Tensor::zeros(1, 2, 4, 4)).is_err());
        assert!(conv.forward(&Tensor::zeros(1, 3, 5, 4)).is_err());
        assert!(conv.backward(&Tensor::zeros(1, 4, 2, 2)).is_err());
        let mut de = Deconv4x4s2::new("d", 3, 4, &mut rng);
        assert!(de.forward(&Tensor::zeros(1, 2, 4, 4)).is_err());
    }
}
