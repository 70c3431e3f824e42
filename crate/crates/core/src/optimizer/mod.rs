//! Per-surfel Levenberg-Marquardt minimization of the Huber photometric
//! error over a window of posed frames.

mod jacobian;
mod problem;

pub use jacobian::jacobian_inverse_depth;
pub use problem::{FootprintPixel, NormalEquations, PhotometricProblem, SurfelUpdateStats};

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{GrayImage, Pose};
use crate::surfel::{footprints, rasterize, Keyframe};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizerError {
    #[error("{valid} valid observations, at least {required} required")]
    InsufficientObservations { valid: usize, required: usize },
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    /// Huber threshold in intensity units.
    pub huber_delta: f64,
    pub lm_lambda_init: f64,
    pub lm_up: f64,
    pub lm_down: f64,
    pub max_iterations: usize,
    /// Minimum number of (frame, pixel) observations to optimize a surfel.
    pub min_valid_pixels: usize,
    /// Number of frames in the window.
    pub window_size: usize,
    /// Relative cost decrease below which a surfel counts as converged.
    pub convergence_eps: f64,
    /// When false, `∂id_u/∂n` is forced to zero and only depth is estimated.
    pub normal_jacobian_enabled: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            huber_delta: 0.035,
            lm_lambda_init: 1e-2,
            lm_up: 10.0,
            lm_down: 0.5,
            max_iterations: 10,
            min_valid_pixels: 16,
            window_size: 5,
            convergence_eps: 1e-4,
            normal_jacobian_enabled: true,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        let bad = |m: &str| Err(OptimizerError::InvalidConfig(m.into()));
        if !(self.huber_delta > 0.0) {
            return bad("huber_delta must be positive");
        }
        if !(self.lm_lambda_init > 0.0) {
            return bad("lm_lambda_init must be positive");
        }
        if !(self.lm_up > 1.0) {
            return bad("lm_up must exceed 1");
        }
        if !(self.lm_down > 0.0 && self.lm_down < 1.0) {
            return bad("lm_down must lie in (0, 1)");
        }
        if self.max_iterations == 0 || self.min_valid_pixels == 0 || self.window_size == 0 {
            return bad("max_iterations, min_valid_pixels and window_size must be positive");
        }
        if !(self.convergence_eps > 0.0) {
            return bad("convergence_eps must be positive");
        }
        Ok(())
    }
}

/// A photometric measurement: an image and the transform `P_kf^f` taking
/// keyframe-camera points into this frame's camera.
#[derive(Debug, Clone)]
pub struct Frame {
    pub image: GrayImage,
    pub pose_kf_to_frame: Pose,
    pub timestamp: f64,
}

impl Frame {
    pub fn new(image: GrayImage, pose_kf_to_frame: Pose, timestamp: f64) -> Self {
        Self {
            image,
            pose_kf_to_frame,
            timestamp,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptimizeStats {
    pub surfels: usize,
    pub optimized: usize,
    pub skipped: usize,
    pub converged: usize,
    /// Mean over optimized surfels of the cost per valid observation.
    pub mean_cost_before: f64,
    pub mean_cost_after: f64,
    pub total_iterations: usize,
}

impl OptimizeStats {
    pub fn converged_fraction(&self) -> f64 {
        if self.optimized == 0 {
            0.0
        } else {
            self.converged as f64 / self.optimized as f64
        }
    }
}

/// Builds the photometric problem for the keyframe's current window.
pub fn keyframe_problem<'a>(kf: &'a Keyframe, cfg: &'a OptimizerConfig) -> PhotometricProblem<'a, GrayImage> {
    PhotometricProblem::new(
        &kf.intrinsics,
        kf.window().iter().map(|f| (&f.image, f.pose_kf_to_frame)),
        cfg,
    )
}

/// Footprint pixels of every surfel, from a fresh rasterization.
pub fn keyframe_footprints(kf: &Keyframe) -> Vec<Vec<FootprintPixel>> {
    let buffers = rasterize(kf);
    footprints(&buffers, kf.surfels.len())
        .into_iter()
        .map(|fp| {
            fp.into_iter()
                .map(|i| FootprintPixel::from_index(i, &kf.image, &kf.intrinsics))
                .collect()
        })
        .collect()
}

/// Runs one LM update on every surfel against the frozen window. Surfels
/// share no mutable state, so the outcome does not depend on scheduling.
/// Surfels without enough observations are left untouched.
pub fn optimize_keyframe(kf: &mut Keyframe, cfg: &OptimizerConfig) -> OptimizeStats {
    let mut stats = OptimizeStats {
        surfels: kf.surfels.len(),
        ..Default::default()
    };
    if kf.surfels.is_empty() || kf.window().is_empty() {
        stats.skipped = kf.surfels.len();
        return stats;
    }
    let fps = keyframe_footprints(kf);
    let stamp = kf.frame_count;
    let results: Vec<_> = {
        let problem = keyframe_problem(kf, cfg);
        kf.surfels
            .par_iter()
            .zip(fps.par_iter())
            .map(|(s, px)| problem.lm_update(s, px, stamp).ok())
            .collect()
    };

    let mut before = 0.0;
    let mut after = 0.0;
    for (slot, result) in kf.surfels.iter_mut().zip(results) {
        match result {
            Some((s, st)) => {
                *slot = s;
                stats.optimized += 1;
                stats.converged += st.converged as usize;
                stats.total_iterations += st.iterations;
                before += st.initial_cost;
                after += st.final_cost;
            }
            None => stats.skipped += 1,
        }
    }
    if stats.optimized > 0 {
        stats.mean_cost_before = before / stats.optimized as f64;
        stats.mean_cost_after = after / stats.optimized as f64;
    }
    stats
}
