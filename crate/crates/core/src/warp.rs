//! Dense flow fields and differentiable bilinear warping.
//!
//! A flow field stores, for every output pixel, the normalized source
//! coordinate in the guide image to read from. Sampling clamps coordinates to
//! the guide's pixel range; at lattice points the derivative is taken from the
//! cell on the left (or the inside cell at the border).

use crate::error::{Error, Result};
use crate::image::{norm_to_pixel, pixel_to_norm, Image};

#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub height: usize,
    pub width: usize,
    pub phi_x: Vec<f64>,
    pub phi_y: Vec<f64>,
}

impl FlowField {
    pub fn new(height: usize, width: usize, phi_x: Vec<f64>, phi_y: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || phi_x.len() != height * width || phi_y.len() != height * width {
            return Err(Error::Shape(format!("flow planes do not match {height}x{width}")));
        }
        if phi_x.iter().chain(&phi_y).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite flow value".into()));
        }
        Ok(Self { height, width, phi_x, phi_y })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            phi_x: vec![0.0; height * width],
            phi_y: vec![0.0; height * width],
        }
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Planar `[phi_x..., phi_y...]`, the layout of a 2-channel network output.
    pub fn to_planar(&self) -> Vec<f64> {
        let mut v = self.phi_x.clone();
        v.extend_from_slice(&self.phi_y);
        v
    }

    pub fn from_planar(height: usize, width: usize, planar: &[f64]) -> Result<Self> {
        let n = height * width;
        if planar.len() != 2 * n {
            return Err(Error::Shape("flow planar buffer length".into()));
        }
        Self::new(height, width, planar[..n].to_vec(), planar[n..].to_vec())
    }

    /// Mirror left-right: `phi'(i, j) = (-phi_x(i, W-1-j), phi_y(i, W-1-j))`.
    pub fn flip_horizontal(&self) -> FlowField {
        let (h, w) = (self.height, self.width);
        let mut out = FlowField::zeros(h, w);
        for i in 0..h {
            for j in 0..w {
                out.phi_x[i * w + j] = -self.phi_x[i * w + w - 1 - j];
                out.phi_y[i * w + j] = self.phi_y[i * w + w - 1 - j];
            }
        }
        out
    }

    /// Binary `FLW1` file: magic, `u32` height and width (little-endian), then
    /// per pixel in row-major order the pair `(phi_x, phi_y)` as `f32` LE.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 8 * self.len());
        out.extend_from_slice(b"FLW1");
        out.extend((self.height as u32).to_le_bytes());
        out.extend((self.width as u32).to_le_bytes());
        for k in 0..self.len() {
            out.extend((self.phi_x[k] as f32).to_le_bytes());
            out.extend((self.phi_y[k] as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..4] != b"FLW1" {
            return Err(Error::parse(0, "missing FLW1 magic"));
        }
        let h = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        let w = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        if h == 0 || w == 0 {
            return Err(Error::parse(4, "zero flow dimension"));
        }
        let need = h
            .checked_mul(w)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| Error::parse(4, "flow dimensions overflow"))?;
        if bytes.len() - 12 < need {
            return Err(Error::parse(bytes.len(), format!("truncated flow payload, need {need} bytes")));
        }
        let f = |off: usize| f32::from_le_bytes(bytes[off..off + 4].try_into().expect("4 bytes")) as f64;
        let (mut px, mut py) = (Vec::with_capacity(h * w), Vec::with_capacity(h * w));
        for k in 0..h * w {
            px.push(f(12 + 8 * k));
            py.push(f(16 + 8 * k));
        }
        FlowField::new(h, w, px, py)
    }
}

/// Flow whose every pixel points at its own center.
pub fn flow_identity(height: usize, width: usize) -> FlowField {
    let mut f = FlowField::zeros(height, width);
    for i in 0..height {
        for j in 0..width {
            f.phi_x[i * width + j] = pixel_to_norm(j as f64, width);
            f.phi_y[i * width + j] = pixel_to_norm(i as f64, height);
        }
    }
    f
}

/// Bilinear cell along one axis for a normalized coordinate.
///
/// Returns `(i0, i1, frac, dpix_dnorm)`; the derivative is zero when the
/// coordinate was clamped.
#[inline]
pub(crate) fn axis_cell(coord: f64, len: usize) -> (usize, usize, f64, f64) {
    let p = norm_to_pixel(coord, len);
    let max = (len - 1) as f64;
    let (pc, dscale) = if p < 0.0 {
        (0.0, 0.0)
    } else if p > max {
        (max, 0.0)
    } else {
        (p, len as f64 / 2.0)
    };
    if len == 1 {
        return (0, 0, 0.0, 0.0);
    }
    let i0 = ((pc.ceil() as isize) - 1).clamp(0, len as isize - 2) as usize;
    (i0, i0 + 1, pc - i0 as f64, dscale)
}

/// Warps an HWC buffer `guide` (`gh x gw x c`) by `flow`; output is HWC at the flow's size.
pub fn warp_raw(guide: &[f64], gh: usize, gw: usize, c: usize, flow: &FlowField) -> Vec<f64> {
    let (h, w) = (flow.height, flow.width);
    let mut out = vec![0.0; h * w * c];
    for k in 0..h * w {
        let (x0, x1, fx, _) = axis_cell(flow.phi_x[k], gw);
        let (y0, y1, fy, _) = axis_cell(flow.phi_y[k], gh);
        let w00 = (1.0 - fy) * (1.0 - fx);
        let w01 = (1.0 - fy) * fx;
        let w10 = fy * (1.0 - fx);
        let w11 = fy * fx;
        for ch in 0..c {
            let g = |y: usize, x: usize| guide[(y * gw + x) * c + ch];
            out[k * c + ch] = w00 * g(y0, x0) + w01 * g(y0, x1) + w10 * g(y1, x0) + w11 * g(y1, x1);
        }
    }
    out
}

/// Backward of [`warp_raw`]: returns `(grad_guide, grad_flow)`.
pub fn warp_backward_raw(
    grad_out: &[f64],
    guide: &[f64],
    gh: usize,
    gw: usize,
    c: usize,
    flow: &FlowField,
) -> (Vec<f64>, FlowField) {
    let (h, w) = (flow.height, flow.width);
    let mut grad_guide = vec![0.0; gh * gw * c];
    let mut grad_flow = FlowField::zeros(h, w);
    for k in 0..h * w {
        let (x0, x1, fx, sx) = axis_cell(flow.phi_x[k], gw);
        let (y0, y1, fy, sy) = axis_cell(flow.phi_y[k], gh);
        let w00 = (1.0 - fy) * (1.0 - fx);
        let w01 = (1.0 - fy) * fx;
        let w10 = fy * (1.0 - fx);
        let w11 = fy * fx;
        let (mut dx, mut dy) = (0.0, 0.0);
        for ch in 0..c {
            let go = grad_out[k * c + ch];
            if go == 0.0 {
                continue;
            }
            let idx = |y: usize, x: usize| (y * gw + x) * c + ch;
            grad_guide[idx(y0, x0)] += w00 * go;
            grad_guide[idx(y0, x1)] += w01 * go;
            grad_guide[idx(y1, x0)] += w10 * go;
            grad_guide[idx(y1, x1)] += w11 * go;
            let (g00, g01, g10, g11) = (guide[idx(y0, x0)], guide[idx(y0, x1)], guide[idx(y1, x0)], guide[idx(y1, x1)]);
            dx += go * ((1.0 - fy) * (g01 - g00) + fy * (g11 - g10));
            dy += go * ((1.0 - fx) * (g10 - g00) + fx * (g11 - g01));
        }
        grad_flow.phi_x[k] = dx * sx;
        grad_flow.phi_y[k] = dy * sy;
    }
    (grad_guide, grad_flow)
}

/// Bilinear warp of `guide` by `flow`; the output has the flow's size.
pub fn warp_bilinear(guide: &Image, flow: &FlowField) -> Image {
    let (gh, gw, c) = guide.dims();
    let out = warp_raw(guide.data(), gh, gw, c, flow);
    Image::from_vec(flow.height, flow.width, c, out).expect("flow dimensions are positive")
}

/// Gradients of `<grad_out, warp(guide, flow)>` with respect to the guide
/// (HWC, guide-shaped) and the flow.
pub fn warp_backward(grad_out: &[f64], guide: &Image, flow: &FlowField) -> Result<(Vec<f64>, FlowField)> {
    let (gh, gw, c) = guide.dims();
    if grad_out.len() != flow.len() * c {
        return Err(Error::Shape(format!(
            "warp cotangent has {} values, expected {}",
            grad_out.len(),
            flow.len() * c
        )));
    }
    Ok(warp_backward_raw(grad_out, guide.data(), gh, gw, c, flow))
}

/// Bilinear sample of the flow at a normalized point, with the four
/// `(flat index, weight)` pairs used, so callers can scatter gradients.
pub fn sample_flow(flow: &FlowField, x: f64, y: f64) -> ([f64; 2], [(usize, f64); 4]) {
    let (x0, x1, fx, _) = axis_cell(x, flow.width);
    let (y0, y1, fy, _) = axis_cell(y, flow.height);
    let w = flow.width;
    let taps = [
        (y0 * w + x0, (1.0 - fy) * (1.0 - fx)),
        (y0 * w + x1, (1.0 - fy) * fx),
        (y1 * w + x0, fy * (1.0 - fx)),
        (y1 * w + x1, fy * fx),
    ];
    let mut v = [0.0; 2];
    for &(idx, wt) in &taps {
        v[0] += wt * flow.phi_x[idx];
        v[1] += wt * flow.phi_y[idx];
    }
    (v, taps)
}

/// Flow mapping a `ph x pw` patch grid onto the normalized rectangle
/// `[x0, x1] x [y0, y1]` of a source image; used for bounding-box crops.
pub fn crop_flow(x0: f64, y0: f64, x1: f64, y1: f64, ph: usize, pw: usize) -> FlowField {
    let mut f = FlowField::zeros(ph, pw);
    for i in 0..ph {
        let v = (pixel_to_norm(i as f64, ph) + 1.0) / 2.0;
        for j in 0..pw {
            let u = (pixel_to_norm(j as f64, pw) + 1.0) / 2.0;
            f.phi_x[i * pw + j] = x0 + u * (x1 - x0);
            f.phi_y[i * pw + j] = y0 + v * (y1 - y0);
        }
    }
    f
}
