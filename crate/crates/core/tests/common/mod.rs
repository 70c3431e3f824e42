//! Synthetic setups and brute-force oracles shared by the integration tests.
#![allow(dead_code, clippy::neg_cmp_op_on_partial_ord)]

use nalgebra::{Vector2, Vector3};
use surfel_depth::geometry::{CameraIntrinsics, GrayImage, Pose};
use surfel_depth::optimizer::FootprintPixel;
use surfel_depth::surfel::{
    footprints, plane_inverse_depth, rasterize_surfels, RasterBuffers, Surfel, DEPTH_TIE_EPS, EMPTY,
};
use surfel_depth::synthetic::{render, GroundTruth, PlaneScene, SceneKind, SceneSpec, TrajectoryKind};

/// A keyframe rendering plus window frames with their keyframe-to-frame
/// poses.
pub struct Window {
    pub k: CameraIntrinsics,
    pub scene: PlaneScene,
    pub kf_pose: Pose,
    pub kf_image: GrayImage,
    pub truth: GroundTruth,
    pub frames: Vec<(GrayImage, Pose)>,
}

impl Window {
    pub fn truth_at(&self, s: &Surfel) -> (f64, Vector3<f64>) {
        let c = s.center_pixel(&self.k);
        let i = c.y.round() as usize * self.k.width + c.x.round() as usize;
        (self.truth.inv_depth[i], self.truth.normals[i])
    }

    pub fn frame_refs(&self) -> impl Iterator<Item = (&GrayImage, Pose)> {
        self.frames.iter().map(|(i, p)| (i, *p))
    }
}

/// Frame 0 of the trajectory is the keyframe, frames `1..=n` the window.
pub fn window(scene: SceneKind, trajectory: TrajectoryKind, step: f64, n: usize) -> Window {
    let spec = SceneSpec {
        scene,
        trajectory,
        frames: n + 1,
        step,
        ..Default::default()
    };
    let k = spec.intrinsics();
    let scene = spec.build_scene();
    let traj = spec.build_trajectory();
    let kf_pose = traj.entries()[0].1;
    let r0 = render(&scene, &kf_pose, &k);
    let frames = traj.entries()[1..]
        .iter()
        .map(|(_, p)| (render(&scene, p, &k).image, p.inverse().compose(&kf_pose)))
        .collect();
    Window {
        k,
        scene,
        kf_pose,
        kf_image: r0.image,
        truth: r0.truth,
        frames,
    }
}

/// Rotates `n` by `deg` degrees about an axis perpendicular to it.
pub fn tilt(n: &Vector3<f64>, hint: Vector3<f64>, deg: f64) -> Vector3<f64> {
    let axis = hint.cross(n).normalize();
    Pose::from_axis_angle(axis * deg.to_radians(), Vector3::zeros()).rotate(n)
}

pub fn angle_deg(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    (a.dot(b) / (a.norm() * b.norm())).clamp(-1.0, 1.0).acos().to_degrees()
}

pub fn footprint_pixels(surfels: &[Surfel], k: &CameraIntrinsics, image: &GrayImage) -> Vec<Vec<FootprintPixel>> {
    let b = rasterize_surfels(surfels, k);
    footprints(&b, surfels.len())
        .into_iter()
        .map(|fp| {
            fp.into_iter()
                .map(|i| FootprintPixel::from_index(i, image, k))
                .collect()
        })
        .collect()
}

/// Per pixel, tests every surfel in slice order: inside the disk, valid
/// plane, nearer than the current winner (ties within the tolerance go to
/// the lower id).
pub fn brute_force_raster(surfels: &[Surfel], k: &CameraIntrinsics) -> RasterBuffers {
    let mut out = RasterBuffers::empty(k.width, k.height);
    for y in 0..k.height {
        for x in 0..k.width {
            let u = Vector2::new(x as f64, y as f64);
            let mut best: Option<(f64, usize)> = None;
            for (i, s) in surfels.iter().enumerate() {
                if !((s.center_pixel(k) - u).norm() < s.radius_px) {
                    continue;
                }
                let Ok(id) = plane_inverse_depth(s, &u, k) else {
                    continue;
                };
                best = match best {
                    None => Some((id, i)),
                    Some((bid, bi)) => {
                        let wins =
                            id > bid + DEPTH_TIE_EPS || ((id - bid).abs() <= DEPTH_TIE_EPS && s.id < surfels[bi].id);
                        if wins {
                            Some((id, i))
                        } else {
                            Some((bid, bi))
                        }
                    }
                };
            }
            if let Some((id, i)) = best {
                out.inv_depth[y * k.width + x] = id;
                out.surfel_index[y * k.width + x] = i as u32;
            }
        }
    }
    debug_assert!(out
        .surfel_index
        .iter()
        .all(|&s| s == EMPTY || (s as usize) < surfels.len()));
    out
}
