//! Dense NCHW tensors, hand-differentiated layers, and the restoration networks.
//!
//! Every layer caches what its backward pass needs during `forward`, and
//! `backward` accumulates parameter gradients into [`ParamTensor::grad`] while
//! returning the gradient with respect to the layer input. Calls must be
//! paired: one `backward` per `forward`, in reverse order.

pub mod checkpoint;
pub mod features;
pub mod gradcheck;
pub mod layers;
pub mod nets;

use crate::error::{Error, Result};
use crate::image::Image;
use rand::Rng;
use rand_distr::StandardNormal;

pub use layers::{Activation, BatchNorm, Conv4x4s2, Deconv4x4s2};
pub use nets::{Discriminator, NetConfig, RecNet, WarpNet};

/// Which statistics batch normalization uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics; running averages are updated.
    Train,
    /// Running averages.
    Eval,
    /// Batch statistics; running averages are left untouched.
    Infer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        Self { n, c, h, w, data: vec![0.0; n * c * h * w] }
    }

    pub fn from_vec(n: usize, c: usize, h: usize, w: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * c * h * w {
            return Err(Error::Shape(format!(
                "tensor {n}x{c}x{h}x{w} needs {} values, got {}",
                n * c * h * w,
                data.len()
            )));
        }
        Ok(Self { n, c, h, w, data })
    }

    pub fn randn<R: Rng + ?Sized>(n: usize, c: usize, h: usize, w: usize, std: f64, rng: &mut R) -> Self {
        let data = (0..n * c * h * w)
            .map(|_| std * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self { n, c, h, w, data }
    }

    #[inline]
    pub fn shape(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn plane(&self) -> usize {
        self.h * self.w
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.shape() == other.shape()
    }

    pub(crate) fn check_shape(&self, shape: [usize; 4], what: &str) -> Result<()> {
        if self.shape() == shape {
            Ok(())
        } else {
            Err(Error::Shape(format!("{what}: expected {shape:?}, got {:?}", self.shape())))
        }
    }

    /// Single-sample tensor from an image (planar channels).
    pub fn from_image(img: &Image) -> Tensor {
        let (h, w, c) = img.dims();
        Tensor { n: 1, c, h, w, data: img.to_planar() }
    }

    /// Batch of equally sized images.
    pub fn from_images(imgs: &[&Image]) -> Result<Tensor> {
        let first = imgs.first().ok_or_else(|| Error::Shape("empty image batch".into()))?;
        let (h, w, c) = first.dims();
        let mut data = Vec::with_capacity(imgs.len() * h * w * c);
        for im in imgs {
            if im.dims() != (h, w, c) {
                return Err(Error::Shape("image batch with mixed sizes".into()));
            }
            data.extend(im.to_planar());
        }
        Ok(Tensor { n: imgs.len(), c, h, w, data })
    }

    /// Sample `k` as an image; values are clamped into `[0, 1]`.
    pub fn to_image(&self, k: usize) -> Result<Image> {
        let per = self.c * self.plane();
        Image::from_planar(self.h, self.w, self.c, &self.data[k * per..(k + 1) * per])
    }

    /// Single-sample tensor from an HWC buffer.
    pub fn from_hwc(h: usize, w: usize, c: usize, hwc: &[f64]) -> Result<Tensor> {
        if hwc.len() != h * w * c {
            return Err(Error::Shape(format!("{h}x{w}x{c} buffer has {} values", hwc.len())));
        }
        let mut data = vec![0.0; hwc.len()];
        for k in 0..h * w {
            for ch in 0..c {
                data[ch * h * w + k] = hwc[k * c + ch];
            }
        }
        Ok(Tensor { n: 1, c, h, w, data })
    }

    /// Sample `k` as an unclamped HWC buffer.
    pub fn to_hwc(&self, k: usize) -> Vec<f64> {
        let p = self.plane();
        let base = k * self.c * p;
        let mut out = vec![0.0; self.c * p];
        for ch in 0..self.c {
            for i in 0..p {
                out[i * self.c + ch] = self.data[base + ch * p + i];
            }
        }
        out
    }

    /// Concatenate along channels.
    pub fn concat_channels(a: &Tensor, b: &Tensor) -> Result<Tensor> {
        if a.n != b.n || a.h != b.h || a.w != b.w {
            return Err(Error::Shape(format!(
                "concat of {:?} and {:?}",
                a.shape(),
                b.shape()
            )));
        }
        let (pa, pb) = (a.c * a.plane(), b.c * b.plane());
        let mut data = Vec::with_capacity(a.len() + b.len());
        for k in 0..a.n {
            data.extend_from_slice(&a.data[k * pa..(k + 1) * pa]);
            data.extend_from_slice(&b.data[k * pb..(k + 1) * pb]);
        }
        Ok(Tensor { n: a.n, c: a.c + b.c, h: a.h, w: a.w, data })
    }

    /// Backward of [`Tensor::concat_channels`]: splits after `ca` channels.
    pub fn split_channels(&self, ca: usize) -> Result<(Tensor, Tensor)> {
        if ca > self.c {
            return Err(Error::Shape(format!("split at {ca} of {} channels", self.c)));
        }
        let cb = self.c - ca;
        let p = self.plane();
        let mut a = Tensor::zeros(self.n, ca, self.h, self.w);
        let mut b = Tensor::zeros(self.n, cb, self.h, self.w);
        for k in 0..self.n {
            let src = &self.data[k * self.c * p..(k + 1) * self.c * p];
            a.data[k * ca * p..(k + 1) * ca * p].copy_from_slice(&src[..ca * p]);
            b.data[k * cb * p..(k + 1) * cb * p].copy_from_slice(&src[ca * p..]);
        }
        Ok((a, b))
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// A trainable array with its gradient and Adam moment buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    pub grad: Vec<f64>,
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
}

impl ParamTensor {
    pub fn new(name: impl Into<String>, shape: &[usize], values: Vec<f64>) -> Self {
        let n: usize = shape.iter().product();
        assert_eq!(n, values.len(), "parameter shape and value count disagree");
        Self {
            name: name.into(),
            shape: shape.to_vec(),
            values,
            grad: vec![0.0; n],
            adam_m: vec![0.0; n],
            adam_v: vec![0.0; n],
        }
    }

    pub fn filled(name: impl Into<String>, shape: &[usize], v: f64) -> Self {
        let n = shape.iter().product();
        Self::new(name, shape, vec![v; n])
    }

    pub fn gaussian<R: Rng + ?Sized>(name: impl Into<String>, shape: &[usize], std: f64, rng: &mut R) -> Self {
        let n = shape.iter().product();
        let values = (0..n).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect();
        Self::new(name, shape, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }
}

/// Anything that owns trainable parameters and persistent buffers.
pub trait Module {
    fn params(&self) -> Vec<&ParamTensor>;
    fn params_mut(&mut self) -> Vec<&mut ParamTensor>;

    /// Non-trainable state that must be checkpointed (batch-norm running statistics).
    fn buffers(&self) -> Vec<&ParamTensor> {
        Vec::new()
    }

    fn buffers_mut(&mut self) -> Vec<&mut ParamTensor> {
        Vec::new()
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }
}
