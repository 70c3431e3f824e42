use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma};

use super::{load_calibration, load_trajectory, DatasetError};
use crate::geometry::{CameraIntrinsics, GrayImage, Pose};

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

/// Where a sequence lives on disk and how trajectory timestamps map to
/// image files.
///
/// Images are named by their timestamp (`1305031102.175304.png`). A
/// trajectory timestamp takes the image whose numeric stem equals it, or
/// failing that the nearest one within `max_time_offset` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub image_dir: PathBuf,
    pub calibration: PathBuf,
    pub trajectory: PathBuf,
    pub max_time_offset: f64,
}

/// Trajectory entries resolved to images.
#[derive(Debug, Clone, PartialEq)]
pub struct Association {
    /// `(timestamp, world_from_camera, image path)` in trajectory order.
    pub frames: Vec<(f64, Pose, PathBuf)>,
    /// Trajectory entries with no image close enough.
    pub dropped: usize,
}

impl DatasetManifest {
    /// The conventional layout: `images/`, `calibration.txt` and
    /// `trajectory.txt` under `root`.
    pub fn from_root(root: &Path) -> Self {
        Self {
            image_dir: root.join("images"),
            calibration: root.join("calibration.txt"),
            trajectory: root.join("trajectory.txt"),
            max_time_offset: 0.01,
        }
    }

    pub fn load_calibration(&self) -> Result<CameraIntrinsics, DatasetError> {
        load_calibration(&self.calibration)
    }

    pub fn associate(&self) -> Result<Association, DatasetError> {
        let trajectory = load_trajectory(&self.trajectory)?;
        let images = self.list_images()?;
        let mut frames = Vec::with_capacity(trajectory.len());
        let mut dropped = 0;
        for &(t, pose) in trajectory.iter() {
            let exact = images.iter().find(|(ti, _)| *ti == t);
            let chosen = exact.or_else(|| {
                images
                    .iter()
                    .filter(|(ti, _)| (ti - t).abs() <= self.max_time_offset)
                    .min_by(|a, b| (a.0 - t).abs().total_cmp(&(b.0 - t).abs()))
            });
            match chosen {
                Some((_, path)) => frames.push((t, pose, path.clone())),
                None => dropped += 1,
            }
        }
        if dropped > 0 {
            log::warn!(
                "{dropped} of {} trajectory entries have no image within {} s",
                trajectory.len(),
                self.max_time_offset
            );
        }
        Ok(Association { frames, dropped })
    }

    /// Images with a numeric stem, sorted by time then name.
    fn list_images(&self) -> Result<Vec<(f64, PathBuf)>, DatasetError> {
        let dir = &self.image_dir;
        let mut images = Vec::new();
        for entry in std::fs::read_dir(dir).map_err(|e| DatasetError::io(dir, e))? {
            let path = entry.map_err(|e| DatasetError::io(dir, e))?.path();
            let ext_ok = path
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
            let time = path
                .file_stem()
                .and_then(|s| s.to_str())
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|t| t.is_finite());
            if let (true, Some(t)) = (ext_ok, time) {
                images.push((t, path));
            }
        }
        images.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        Ok(images)
    }
}

/// Loads an image as grayscale intensities in `[0, 1]`. 16-bit images keep
/// their full precision; color images are converted to luma.
pub fn load_gray_image(path: &Path) -> Result<GrayImage, DatasetError> {
    let img = image::open(path).map_err(|e| DatasetError::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match img {
        DynamicImage::ImageLuma8(b) => b.into_raw().into_iter().map(|v| f64::from(v) / 255.0).collect(),
        DynamicImage::ImageLuma16(b) => b.into_raw().into_iter().map(|v| f64::from(v) / 65535.0).collect(),
        other => other
            .into_luma8()
            .into_raw()
            .into_iter()
            .map(|v| f64::from(v) / 255.0)
            .collect(),
    };
    GrayImage::new(w, h, data).map_err(|e| DatasetError::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Writes a 16-bit grayscale PNG.
pub fn write_gray_image(path: &Path, image: &GrayImage) -> Result<(), DatasetError> {
    let raw: Vec<u16> = image
        .data()
        .iter()
        .map(|v| (v * 65535.0).round().clamp(0.0, 65535.0) as u16)
        .collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(image.width() as u32, image.height() as u32, raw).expect("sized buffer");
    buf.save(path).map_err(|e| DatasetError::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
