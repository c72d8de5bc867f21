//! Guided blind face restoration at desk scale.
//!
//! A warping network predicts a dense flow field that aligns a high-quality
//! guide face with a degraded observation; a U-Net reconstruction network then
//! restores the observation from the degraded input and the warped guide.
//! Everything (layers, gradients, JPEG codec, degradation model) is written
//! by hand in double precision so every gradient can be checked against
//! finite differences.

pub mod cli;
pub mod degrade;
pub mod error;
pub mod gradsuite;
pub mod image;
pub mod jpeg;
pub mod losses;
pub mod metrics;
pub mod nn;
pub mod ppm;
pub mod toyface;
pub mod train;
pub mod warp;

pub use error::{Error, Result};
pub use image::{landmark_bbox, Image, LandmarkSet, Rect};
