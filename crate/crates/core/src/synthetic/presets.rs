use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;

use super::{PlanePatch, PlaneScene, Texture, Trajectory};
use crate::geometry::{CameraIntrinsics, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    /// One fronto-parallel plane at depth 2.
    Fronto,
    /// One plane at depth 2 tilted 30° about the vertical axis.
    Slanted,
    /// Back wall, floor, side wall and a slanted panel.
    Desk,
    /// Looking down a box-shaped corridor: two walls, floor, ceiling and an
    /// end wall, mostly seen at grazing angles.
    Corridor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryKind {
    /// Sideways translation along camera x.
    Strafe,
    /// Translation along the optical axis (negative steps move backward).
    Dolly,
    /// Pure yaw rotation about the camera center.
    Rotate,
    /// Forward translation with a sideways component (direction `(1, 0, 2)`).
    Diagonal,
}

macro_rules! text_enum {
    ($t:ty { $($v:ident => $s:literal),* $(,)? }) => {
        impl FromStr for $t {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($s => Ok(Self::$v),)*
                    other => Err(format!("unknown {} {other:?}", stringify!($t))),
                }
            }
        }
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $(Self::$v => $s,)* })
            }
        }
    };
}

text_enum!(SceneKind { Fronto => "fronto", Slanted => "slanted", Desk => "desk", Corridor => "corridor" });
text_enum!(TrajectoryKind { Strafe => "strafe", Dolly => "dolly", Rotate => "rotate", Diagonal => "diagonal" });

/// Everything needed to regenerate a synthetic sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub scene: SceneKind,
    pub trajectory: TrajectoryKind,
    pub frames: usize,
    /// Per-frame translation (scene units) or rotation (radians).
    pub step: f64,
    pub texture_seed: u64,
    pub texture_waves: usize,
    pub min_wavelength: f64,
    pub max_wavelength: f64,
    pub noise_sigma: f64,
    pub width: usize,
    pub height: usize,
    pub focal: f64,
    pub frame_rate: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            scene: SceneKind::Desk,
            trajectory: TrajectoryKind::Strafe,
            frames: 60,
            step: 0.01,
            texture_seed: 1,
            texture_waves: 6,
            min_wavelength: 0.06,
            max_wavelength: 0.3,
            noise_sigma: 0.0,
            width: 640,
            height: 480,
            focal: 525.0,
            frame_rate: 30.0,
        }
    }
}

impl SceneSpec {
    pub fn intrinsics(&self) -> CameraIntrinsics {
        CameraIntrinsics::new(
            self.focal,
            self.focal,
            (self.width as f64 - 1.0) / 2.0,
            (self.height as f64 - 1.0) / 2.0,
            self.width,
            self.height,
        )
        .expect("valid synthetic intrinsics")
    }

    pub fn texture(&self) -> Texture {
        Texture::random(
            self.texture_seed,
            self.texture_waves,
            self.min_wavelength,
            self.max_wavelength,
        )
    }

    pub fn build_scene(&self) -> PlaneScene {
        let texture = self.texture();
        let patches = match self.scene {
            SceneKind::Fronto => vec![PlanePatch::infinite(
                Vector3::new(0.0, 0.0, 2.0),
                Vector3::new(0.0, 0.0, -1.0),
            )],
            SceneKind::Slanted => vec![PlanePatch::infinite(Vector3::new(0.0, 0.0, 2.0), slanted_normal(30.0))],
            SceneKind::Desk => {
                let panel_normal = Pose::from_axis_angle(
                    Vector3::new(-20f64.to_radians(), 35f64.to_radians(), 0.0),
                    Vector3::zeros(),
                )
                .rotate(&Vector3::new(0.0, 0.0, -1.0));
                vec![
                    // back wall
                    PlanePatch::rectangle(Vector3::new(0.0, -0.6, 3.0), Vector3::new(0.0, 0.0, -1.0), 4.0, 4.0),
                    // floor, y pointing down
                    PlanePatch::rectangle(Vector3::new(0.0, 0.8, 1.5), Vector3::new(0.0, -1.0, 0.0), 4.0, 1.5),
                    // left wall
                    PlanePatch::rectangle(Vector3::new(-1.2, -0.6, 1.5), Vector3::new(1.0, 0.0, 0.0), 1.6, 1.5),
                    // slanted panel
                    PlanePatch::rectangle(Vector3::new(0.45, 0.05, 1.9), panel_normal, 0.5, 0.4),
                ]
            }
            SceneKind::Corridor => {
                let (w, h, len) = (CORRIDOR_HALF_WIDTH, CORRIDOR_HALF_HEIGHT, CORRIDOR_LENGTH);
                let mid = Vector3::new(0.0, 0.0, len / 2.0 - 1.0);
                let half = len / 2.0 + 1.0;
                vec![
                    PlanePatch::rectangle(mid - Vector3::x() * w, Vector3::x(), half, h + 0.1),
                    PlanePatch::rectangle(mid + Vector3::x() * w, -Vector3::x(), half, h + 0.1),
                    PlanePatch::rectangle(mid + Vector3::y() * h, -Vector3::y(), half, w + 0.1),
                    PlanePatch::rectangle(mid - Vector3::y() * h, Vector3::y(), half, w + 0.1),
                    PlanePatch::rectangle(Vector3::new(0.0, 0.0, len), -Vector3::z(), w + h, w + h),
                ]
            }
        };
        PlaneScene::new(patches, texture)
    }

    pub fn build_trajectory(&self) -> Trajectory {
        let entries = (0..self.frames)
            .map(|i| {
                let s = i as f64 * self.step;
                let pose = match self.trajectory {
                    TrajectoryKind::Strafe => Pose::from_translation(Vector3::new(s, 0.0, 0.0)),
                    TrajectoryKind::Dolly => Pose::from_translation(Vector3::new(0.0, 0.0, s)),
                    TrajectoryKind::Diagonal => Pose::from_translation(Vector3::new(1.0, 0.0, 2.0).normalize() * s),
                    TrajectoryKind::Rotate => Pose::from_axis_angle(Vector3::new(0.0, s, 0.0), Vector3::zeros()),
                };
                (i as f64 / self.frame_rate, pose)
            })
            .collect();
        Trajectory::new(entries).expect("synthetic trajectory is ordered")
    }
}

const CORRIDOR_HALF_WIDTH: f64 = 0.45;
const CORRIDOR_HALF_HEIGHT: f64 = 0.35;
const CORRIDOR_LENGTH: f64 = 5.0;

/// Camera-facing normal tilted by `degrees` about the vertical axis.
pub fn slanted_normal(degrees: f64) -> Vector3<f64> {
    let a = degrees.to_radians();
    Vector3::new(a.sin(), 0.0, -a.cos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::render;

    #[test]
    fn enums_round_trip_through_text() {
        for k in [SceneKind::Fronto, SceneKind::Slanted, SceneKind::Desk] {
            assert_eq!(k.to_string().parse::<SceneKind>().unwrap(), k);
        }
        assert!("sphere".parse::<SceneKind>().is_err());
        assert_eq!("dolly".parse::<TrajectoryKind>().unwrap(), TrajectoryKind::Dolly);
    }

    #[test]
    fn desk_fills_the_view() {
        let spec = SceneSpec::default();
        let r = render(&spec.build_scene(), &Pose::identity(), &spec.intrinsics());
        assert_eq!(r.truth.valid_count(), 640 * 480);
        let traj = spec.build_trajectory();
        assert_eq!(traj.len(), 60);
    }
}
