//! Raster images, landmark sets and the normalized coordinate convention.
//!
//! Pixel `(i, j)` of an `H x W` image has its center at normalized
//! coordinates `x = (2j + 1) / W - 1`, `y = (2i + 1) / H - 1`. Warping,
//! landmarks and bounding boxes all use this mapping.

use crate::error::{Error, Result};

/// Normalized coordinate of the center of pixel `index` along an axis of `len` pixels.
#[inline]
pub fn pixel_to_norm(index: f64, len: usize) -> f64 {
    (2.0 * index + 1.0) / len as f64 - 1.0
}

/// Inverse of [`pixel_to_norm`]; returns a fractional pixel index.
#[inline]
pub fn norm_to_pixel(coord: f64, len: usize) -> f64 {
    ((coord + 1.0) * len as f64 - 1.0) / 2.0
}

/// `H x W x C` raster, row-major and channel-interleaved, samples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    /// Builds an image from raw samples. Samples are clamped into `[0, 1]`.
    pub fn from_vec(height: usize, width: usize, channels: usize, mut data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Shape(format!("channel count must be 1 or 3, got {channels}")));
        }
        if height == 0 || width == 0 {
            return Err(Error::Shape("image dimensions must be positive".into()));
        }
        if data.len() != height * width * channels {
            return Err(Error::Shape(format!(
                "expected {} samples for {height}x{width}x{channels}, got {}",
                height * width * channels,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite image sample".into()));
        }
        for v in &mut data {
            *v = v.clamp(0.0, 1.0);
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// Uniform image.
    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        Self::from_vec(height, width, channels, vec![value; height * width * channels])
            .expect("valid dimensions")
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::filled(height, width, channels, 0.0)
    }

    /// Builds an image by evaluating `f(row, col, channel)` at each sample.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * channels);
        for i in 0..height {
            for j in 0..width {
                for c in 0..channels {
                    data.push(f(i, j, c));
                }
            }
        }
        Self::from_vec(height, width, channels, data).expect("valid dimensions")
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.data[(row * self.width + col) * self.channels + channel]
    }

    /// Sample with clamp-to-edge addressing.
    #[inline]
    pub fn get_clamped(&self, row: isize, col: isize, channel: usize) -> f64 {
        let r = row.clamp(0, self.height as isize - 1) as usize;
        let c = col.clamp(0, self.width as isize - 1) as usize;
        self.get(r, c, channel)
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.dims() == other.dims()
    }

    pub(crate) fn check_same_shape(&self, other: &Image, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{what}: {:?} vs {:?}",
                self.dims(),
                other.dims()
            )))
        }
    }

    /// Mirror left-right.
    pub fn flip_horizontal(&self) -> Image {
        Image::from_fn(self.height, self.width, self.channels, |i, j, c| {
            self.get(i, self.width - 1 - j, c)
        })
    }

    /// Converts to three channels by replicating a gray plane; color images are returned as is.
    pub fn to_rgb(&self) -> Image {
        if self.channels == 3 {
            return self.clone();
        }
        Image::from_fn(self.height, self.width, 3, |i, j, _| self.get(i, j, 0))
    }

    /// Planar (channel-major) copy of the samples, `C x H x W`.
    pub fn to_planar(&self) -> Vec<f64> {
        let (h, w, c) = self.dims();
        let mut out = vec![0.0; h * w * c];
        for i in 0..h {
            for j in 0..w {
                for k in 0..c {
                    out[(k * h + i) * w + j] = self.get(i, j, k);
                }
            }
        }
        out
    }

    /// Inverse of [`Image::to_planar`]; values are clamped into `[0, 1]`.
    pub fn from_planar(height: usize, width: usize, channels: usize, planar: &[f64]) -> Result<Image> {
        if planar.len() != height * width * channels {
            return Err(Error::Shape("planar buffer length".into()));
        }
        let mut data = vec![0.0; planar.len()];
        for k in 0..channels {
            for i in 0..height {
                for j in 0..width {
                    data[(i * width + j) * channels + k] = planar[(k * height + i) * width + j];
                }
            }
        }
        Image::from_vec(height, width, channels, data)
    }

    /// Side-by-side concatenation of equally tall images.
    pub fn hconcat(images: &[&Image]) -> Result<Image> {
        let first = images
            .first()
            .ok_or_else(|| Error::Shape("hconcat of zero images".into()))?;
        let (h, c) = (first.height, first.channels);
        if images.iter().any(|im| im.height != h || im.channels != c) {
            return Err(Error::Shape("hconcat needs equal height and channels".into()));
        }
        let width: usize = images.iter().map(|im| im.width).sum();
        let mut data = Vec::with_capacity(h * width * c);
        for i in 0..h {
            for im in images {
                let row = &im.data[i * im.width * c..(i + 1) * im.width * c];
                data.extend_from_slice(row);
            }
        }
        Image::from_vec(h, width, c, data)
    }
}

/// Axis-aligned rectangle in normalized coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn contains(&self, other: &Rect) -> bool {
        self.x0 <= other.x0 && self.y0 <= other.y0 && self.x1 >= other.x1 && self.y1 >= other.y1
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

/// Ordered 2-D points in normalized `[-1, 1]` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    points: Vec<[f64; 2]>,
}

impl LandmarkSet {
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self> {
        for (k, p) in points.iter().enumerate() {
            if !(p[0].is_finite() && p[1].is_finite()) || p[0].abs() > 1.0 || p[1].abs() > 1.0 {
                return Err(Error::Param(format!(
                    "landmark {k} = ({}, {}) outside [-1, 1]",
                    p[0], p[1]
                )));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Mirror about `x = 0`, matching [`Image::flip_horizontal`].
    pub fn flip_horizontal(&self) -> LandmarkSet {
        LandmarkSet {
            points: self.points.iter().map(|p| [-p[0], p[1]]).collect(),
        }
    }
}

/// Minimal bounding box of a landmark set, clamped to `[-1, 1]^2`.
pub fn landmark_bbox(lms: &LandmarkSet) -> Result<Rect> {
    let first = lms
        .points()
        .first()
        .ok_or_else(|| Error::Param("bounding box of empty landmark set".into()))?;
    let mut r = Rect {
        x0: first[0],
        y0: first[1],
        x1: first[0],
        y1: first[1],
    };
    for p in &lms.points()[1..] {
        r.x0 = r.x0.min(p[0]);
        r.y0 = r.y0.min(p[1]);
        r.x1 = r.x1.max(p[0]);
        r.y1 = r.y1.max(p[1]);
    }
    r.x0 = r.x0.clamp(-1.0, 1.0);
    r.y0 = r.y0.clamp(-1.0, 1.0);
    r.x1 = r.x1.clamp(-1.0, 1.0);
    r.y1 = r.y1.clamp(-1.0, 1.0);
    Ok(r)
}
