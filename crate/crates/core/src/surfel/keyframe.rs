use std::collections::VecDeque;

use thiserror::Error;

use super::Surfel;
use crate::geometry::{CameraIntrinsics, GrayImage, Pose};
use crate::optimizer::Frame;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KeyframeError {
    #[error("frame timestamp {new} does not follow the window's last timestamp {last}")]
    NonMonotonicFrame { last: f64, new: f64 },
    #[error("frame is {got_w}x{got_h}, keyframe is {want_w}x{want_h}")]
    SizeMismatch {
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
    #[error("frame pose is not finite")]
    NonFinitePose,
}

/// Reference frame owning a set of surfels and the window Ω of recent
/// posed frames that constrain them.
#[derive(Debug, Clone)]
pub struct Keyframe {
    pub image: GrayImage,
    /// `world_from_keyframe`.
    pub pose: Pose,
    pub intrinsics: CameraIntrinsics,
    pub timestamp: f64,
    pub surfels: Vec<Surfel>,
    /// Screen-space radius shared by every surfel of this keyframe.
    pub radius_px: f64,
    /// Number of frames observed since the sequence started.
    pub frame_count: u64,
    window: VecDeque<Frame>,
    window_size: usize,
    next_id: u64,
}

impl Keyframe {
    pub fn new(
        image: GrayImage,
        pose: Pose,
        intrinsics: CameraIntrinsics,
        timestamp: f64,
        radius_px: f64,
        window_size: usize,
    ) -> Self {
        Self {
            image,
            pose,
            intrinsics,
            timestamp,
            surfels: Vec::new(),
            radius_px,
            frame_count: 0,
            window: VecDeque::with_capacity(window_size),
            window_size: window_size.max(1),
            next_id: 0,
        }
    }

    pub fn window(&self) -> &VecDeque<Frame> {
        &self.window
    }

    pub fn window_size(&self) -> usize {
        self.window_size
    }

    pub fn next_surfel_id(&self) -> u64 {
        self.next_id
    }

    /// Appends surfels, keeping ids strictly increasing along the collection.
    pub fn append_surfels(&mut self, new: Vec<Surfel>) {
        for s in new {
            debug_assert!(s.id >= self.next_id, "surfel ids must increase");
            self.next_id = s.id + 1;
            self.surfels.push(s);
        }
    }

    pub(crate) fn set_next_id(&mut self, next: u64) {
        self.next_id = next;
    }

    /// Pushes a frame into the ring buffer, evicting the oldest when full.
    pub fn push_frame(&mut self, frame: Frame) -> Result<(), KeyframeError> {
        if frame.image.width() != self.image.width() || frame.image.height() != self.image.height() {
            return Err(KeyframeError::SizeMismatch {
                got_w: frame.image.width(),
                got_h: frame.image.height(),
                want_w: self.image.width(),
                want_h: self.image.height(),
            });
        }
        if !frame.pose_kf_to_frame.is_finite() {
            return Err(KeyframeError::NonFinitePose);
        }
        if let Some(last) = self.window.back() {
            if !(frame.timestamp > last.timestamp) {
                return Err(KeyframeError::NonMonotonicFrame {
                    last: last.timestamp,
                    new: frame.timestamp,
                });
            }
        }
        if self.window.len() == self.window_size {
            self.window.pop_front();
        }
        self.window.push_back(frame);
        Ok(())
    }

    pub(crate) fn take_window(&mut self) -> VecDeque<Frame> {
        std::mem::take(&mut self.window)
    }

    pub fn clear_window(&mut self) {
        self.window.clear();
    }

    pub fn mean_inverse_depth(&self) -> Option<f64> {
        if self.surfels.is_empty() {
            return None;
        }
        Some(self.surfels.iter().map(|s| s.inv_depth).sum::<f64>() / self.surfels.len() as f64)
    }
}
