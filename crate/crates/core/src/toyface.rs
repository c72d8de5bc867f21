//! Procedural toy faces with analytic landmarks.
//!
//! An identity is a vector of shape, colour and texture parameters drawn from
//! a seed. A rendering applies a pose (rotation and translation), an
//! expression (mouth curvature, eye opening) and an illumination change
//! (gain and bias). Fine identity detail (moles, hair stripes, iris colour)
//! is deliberately small, so heavy degradation erases it while a guide of
//! the same identity still carries it.

use crate::error::{Error, Result};
use crate::image::{pixel_to_norm, Image, LandmarkSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const MIN_SIZE: usize = 32;
pub const SUPERSAMPLE: usize = 4;
pub const LANDMARK_COUNT: usize = 12;
pub const MAX_ROTATION_DEG: f64 = 30.0;
pub const MAX_TRANSLATION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose {
    /// Degrees, counter-clockwise on screen.
    pub rotation_deg: f64,
    pub tx: f64,
    pub ty: f64,
}

impl Pose {
    pub const FRONTAL: Pose = Pose { rotation_deg: 0.0, tx: 0.0, ty: 0.0 };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expression {
    /// `-1` frown, `0` neutral, `1` smile.
    pub mouth_curve: f64,
    /// `1` fully open, towards `0` closed.
    pub eye_open: f64,
}

impl Expression {
    pub const NEUTRAL: Expression = Expression { mouth_curve: 0.0, eye_open: 1.0 };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Illumination {
    pub gain: f64,
    pub bias: f64,
}

impl Illumination {
    pub const NEUTRAL: Illumination = Illumination { gain: 1.0, bias: 0.0 };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyFaceSpec {
    /// Identity seed.
    pub seed: u64,
    pub pose: Pose,
    pub expression: Expression,
    pub illumination: Illumination,
    pub size: usize,
}

impl ToyFaceSpec {
    /// Frontal, eyes open, neutral light: the rendering used as a guide.
    pub fn frontal(seed: u64, size: usize) -> Self {
        Self {
            seed,
            pose: Pose::FRONTAL,
            expression: Expression::NEUTRAL,
            illumination: Illumination::NEUTRAL,
            size,
        }
    }

    /// Random pose, expression and illumination for identity `seed`.
    pub fn sample<R: Rng + ?Sized>(seed: u64, size: usize, rng: &mut R) -> Self {
        Self {
            seed,
            pose: Pose {
                rotation_deg: rng.random_range(-MAX_ROTATION_DEG..=MAX_ROTATION_DEG),
                tx: rng.random_range(-MAX_TRANSLATION..=MAX_TRANSLATION),
                ty: rng.random_range(-MAX_TRANSLATION..=MAX_TRANSLATION),
            },
            expression: Expression {
                mouth_curve: rng.random_range(-1.0..=1.0),
                eye_open: rng.random_range(0.3..=1.0),
            },
            illumination: Illumination {
                gain: rng.random_range(0.75..=1.25),
                bias: rng.random_range(-0.08..=0.08),
            },
            size,
        }
    }
}

type Rgb = [f64; 3];

/// Shape and appearance parameters shared by every rendering of one identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Identity {
    pub background: Rgb,
    pub skin: Rgb,
    pub hair: Rgb,
    pub iris: Rgb,
    pub lips: Rgb,
    pub head_rx: f64,
    pub head_ry: f64,
    pub hairline: f64,
    pub hair_freq: f64,
    pub hair_phase: f64,
    pub eye_dx: f64,
    pub eye_y: f64,
    pub eye_w: f64,
    pub eye_h: f64,
    pub brow_gap: f64,
    pub brow_thick: f64,
    pub nose_len: f64,
    pub mouth_y: f64,
    pub mouth_w: f64,
    /// Moles: centre and radius in face coordinates.
    pub spots: Vec<(f64, f64, f64)>,
}

fn color<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> Rgb {
    [rng.random_range(lo..hi), rng.random_range(lo..hi), rng.random_range(lo..hi)]
}

impl Identity {
    pub fn from_seed(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1d_face);
        let tone = rng.random_range(0.45..0.9);
        let skin = [tone, tone * rng.random_range(0.7..0.85), tone * rng.random_range(0.55..0.75)];
        let head_rx = rng.random_range(0.5..0.6);
        let head_ry = rng.random_range(0.62..0.7);
        let n_spots = rng.random_range(2..=5);
        let spots = (0..n_spots)
            .map(|_| {
                let x = rng.random_range(-0.35..0.35);
                let y = rng.random_range(-0.05..0.45);
                (x, y, rng.random_range(0.035..0.06))
            })
            .collect();
        Self {
            background: color(&mut rng, 0.1, 0.6),
            skin,
            hair: color(&mut rng, 0.02, 0.45),
            iris: color(&mut rng, 0.05, 0.7),
            lips: [rng.random_range(0.55..0.85), rng.random_range(0.1..0.3), rng.random_range(0.15..0.35)],
            head_rx,
            head_ry,
            hairline: rng.random_range(-0.45..-0.3),
            hair_freq: rng.random_range(18.0..30.0),
            hair_phase: rng.random_range(0.0..std::f64::consts::TAU),
            eye_dx: rng.random_range(0.18..0.26),
            eye_y: rng.random_range(-0.2..-0.1),
            eye_w: rng.random_range(0.09..0.13),
            eye_h: rng.random_range(0.05..0.075),
            brow_gap: rng.random_range(0.1..0.15),
            brow_thick: rng.random_range(0.025..0.05),
            nose_len: rng.random_range(0.15..0.25),
            mouth_y: rng.random_range(0.3..0.4),
            mouth_w: rng.random_range(0.14..0.22),
            spots,
        }
    }

    fn mouth_offset(&self, curve: f64) -> f64 {
        -0.07 * curve
    }

    /// Canonical (unposed) landmark positions.
    pub fn landmarks(&self, expr: &Expression) -> Vec<[f64; 2]> {
        let k = self.mouth_offset(expr.mouth_curve);
        let brow_y = self.eye_y - self.brow_gap;
        vec![
            [-self.eye_dx, self.eye_y],
            [self.eye_dx, self.eye_y],
            [-self.eye_dx - self.eye_w, self.eye_y],
            [self.eye_dx + self.eye_w, self.eye_y],
            [-self.eye_dx, brow_y],
            [self.eye_dx, brow_y],
            [0.0, self.eye_y + self.nose_len],
            [-self.mouth_w, self.mouth_y + k / 2.0],
            [self.mouth_w, self.mouth_y + k / 2.0],
            [0.0, self.mouth_y - k / 2.0],
            [0.0, self.head_ry],
            [0.0, self.hairline],
        ]
    }

    /// Colour at canonical face coordinates `(u, v)`.
    fn shade(&self, u: f64, v: f64, expr: &Expression) -> Rgb {
        let head = (u / self.head_rx).powi(2) + (v / self.head_ry).powi(2);
        let hair_shell = (u / (self.head_rx + 0.07)).powi(2) + ((v + 0.04) / (self.head_ry + 0.06)).powi(2);
        if head > 1.0 {
            if hair_shell <= 1.0 && v < 0.15 {
                return self.hair_texture(u, v);
            }
            return self.background;
        }
        if v < self.hairline + 0.04 * (u * 9.0).cos() {
            return self.hair_texture(u, v);
        }
        let mut c = self.skin;
        for &(sx, sy, r) in &self.spots {
            if (u - sx).powi(2) + (v - sy).powi(2) < r * r {
                c = [self.skin[0] * 0.35, self.skin[1] * 0.3, self.skin[2] * 0.3];
            }
        }
        // Nose: narrow darker wedge widening downward.
        let nv = (v - self.eye_y) / self.nose_len;
        if (0.2..=1.0).contains(&nv) && u.abs() < 0.015 + 0.04 * nv {
            c = [c[0] * 0.8, c[1] * 0.78, c[2] * 0.76];
        }
        // Brows.
        let brow_y = self.eye_y - self.brow_gap;
        for side in [-1.0, 1.0] {
            let du = u - side * self.eye_dx;
            if du.abs() < self.eye_w * 1.1 && (v - brow_y - 0.03 * (du / self.eye_w).powi(2)).abs() < self.brow_thick / 2.0 {
                c = [self.hair[0] * 0.8, self.hair[1] * 0.8, self.hair[2] * 0.8];
            }
        }
        // Eyes.
        let eh = self.eye_h * expr.eye_open.clamp(0.05, 1.0);
        for side in [-1.0, 1.0] {
            let du = u - side * self.eye_dx;
            let dv = v - self.eye_y;
            if (du / self.eye_w).powi(2) + (dv / eh).powi(2) <= 1.0 {
                let ir = self.eye_h * 0.75;
                c = if du * du + dv * dv < ir * ir {
                    if du * du + dv * dv < (ir * 0.4).powi(2) {
                        [0.03, 0.03, 0.03]
                    } else {
                        self.iris
                    }
                } else {
                    [0.95, 0.95, 0.92]
                };
            }
        }
        // Mouth: a thick parabola between the corners.
        if u.abs() <= self.mouth_w {
            let k = self.mouth_offset(expr.mouth_curve);
            let t = u / self.mouth_w;
            let y = self.mouth_y - k / 2.0 + k * t * t;
            if (v - y).abs() < 0.035 * (1.0 - 0.5 * t * t) {
                c = self.lips;
            }
        }
        c
    }

    fn hair_texture(&self, u: f64, v: f64) -> Rgb {
        let s = 0.75 + 0.25 * (self.hair_freq * (u + 0.3 * v) + self.hair_phase).sin();
        [self.hair[0] * s, self.hair[1] * s, self.hair[2] * s]
    }
}

fn rotation(pose: &Pose) -> (f64, f64) {
    let t = pose.rotation_deg.to_radians();
    (t.cos(), t.sin())
}

/// Render a face and its landmarks (normalized coordinates).
pub fn gen_toy_face(spec: &ToyFaceSpec) -> Result<(Image, LandmarkSet)> {
    if spec.size < MIN_SIZE {
        return Err(Error::Param(format!("toy faces need size >= {MIN_SIZE}, got {}", spec.size)));
    }
    let id = Identity::from_seed(spec.seed);
    let (cs, sn) = rotation(&spec.pose);
    let n = spec.size;
    let ss = SUPERSAMPLE as f64;
    let ill = spec.illumination;
    let mut data = vec![0.0; n * n * 3];
    for i in 0..n {
        for j in 0..n {
            let mut acc = [0.0; 3];
            for a in 0..SUPERSAMPLE {
                for b in 0..SUPERSAMPLE {
                    let py = pixel_to_norm(i as f64 - 0.5 + (a as f64 + 0.5) / ss, n);
                    let px = pixel_to_norm(j as f64 - 0.5 + (b as f64 + 0.5) / ss, n);
                    // inverse pose: rotate (p - t) by -theta
                    let (dx, dy) = (px - spec.pose.tx, py - spec.pose.ty);
                    let u = cs * dx + sn * dy;
                    let v = -sn * dx + cs * dy;
                    let c = id.shade(u, v, &spec.expression);
                    for k in 0..3 {
                        acc[k] += c[k];
                    }
                }
            }
            for k in 0..3 {
                let v = acc[k] / (ss * ss);
                data[(i * n + j) * 3 + k] = (ill.gain * v + ill.bias).clamp(0.0, 1.0);
            }
        }
    }
    let pts = id
        .landmarks(&spec.expression)
        .into_iter()
        .map(|[u, v]| [cs * u - sn * v + spec.pose.tx, sn * u + cs * v + spec.pose.ty])
        .collect();
    Ok((Image::from_vec(n, n, 3, data)?, LandmarkSet::new(pts)?))
}
