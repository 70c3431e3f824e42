//! Ground-truth generator: textured piecewise-planar scenes rendered along
//! known trajectories, with exact per-pixel inverse depth and normals.

mod eval;
mod presets;
mod render;
mod scene;
mod trajectory;

pub use eval::{evaluate_reconstruction, EvalError, ReconstructionMetrics};
pub use presets::{SceneKind, SceneSpec, TrajectoryKind};
pub use render::{add_noise, render, GroundTruth, Rendered, SceneView};
pub use scene::{Hit, PlanePatch, PlaneScene, Texture, Wave};
pub use trajectory::{Trajectory, TrajectoryError};
