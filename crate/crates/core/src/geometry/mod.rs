//! Camera model, rigid transforms, image sampling and the Huber norm.
//!
//! Pixel convention: the center of pixel `(x, y)` sits at integer coordinate
//! `(x, y)`, origin at the top-left corner, `x` to the right, `y` down. The
//! camera looks down `+z`.

mod camera;
mod huber;
mod image;
mod pose;

pub use camera::{dehomogenization_jacobian, CameraIntrinsics};
pub use huber::huber;
pub use image::{GrayImage, ImageSampler};
pub use pose::Pose;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("point is behind the camera (z = {0})")]
    BehindCamera(f64),
    #[error("sample at ({0}, {1}) lies outside the valid image margin")]
    OutOfBounds(f64, f64),
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid image: {0}")]
    InvalidImage(String),
}
