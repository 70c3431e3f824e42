use nalgebra::{Vector2, Vector3};
use thiserror::Error;

use crate::geometry::CameraIntrinsics;

/// Lower clamp on surfel inverse depth (scene units⁻¹).
pub const INV_DEPTH_MIN: f64 = 1e-4;
/// Upper clamp on surfel inverse depth (scene units⁻¹).
pub const INV_DEPTH_MAX: f64 = 1e3;

const DEGENERATE_DENOMINATOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SurfelError {
    #[error("surfel plane passes through the camera center")]
    DegeneratePlane,
    #[error("surfel plane lies behind the camera along this ray")]
    PlaneBehindCamera,
}

/// An oriented planar disk anchored on a keyframe ray.
///
/// The 3-D center is `ray / inv_depth`; `ray` always has `z = 1`. The normal
/// is unit length and faces the keyframe camera (`normal · ray < 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct Surfel {
    pub id: u64,
    pub ray: Vector3<f64>,
    pub inv_depth: f64,
    pub normal: Vector3<f64>,
    pub radius_px: f64,
    /// Huber cost per valid pixel after the last optimization.
    pub last_residual: f64,
    /// Frame counter at the last successful optimization.
    pub last_seen: u64,
}

impl Surfel {
    /// Builds a surfel, normalizing the ray to `z = 1` and orienting the
    /// normal toward the camera.
    pub fn new(id: u64, ray: Vector3<f64>, inv_depth: f64, normal: Vector3<f64>, radius_px: f64, stamp: u64) -> Self {
        let mut s = Self {
            id,
            ray: ray / ray.z,
            inv_depth,
            normal: normal.normalize(),
            radius_px,
            last_residual: 0.0,
            last_seen: stamp,
        };
        s.orient_normal();
        s
    }

    /// Flips the normal, if needed, so that it faces the camera.
    pub fn orient_normal(&mut self) {
        if self.normal.dot(&self.ray) > 0.0 {
            self.normal = -self.normal;
        }
    }

    pub fn position(&self) -> Vector3<f64> {
        self.ray / self.inv_depth
    }

    pub fn center_pixel(&self, k: &CameraIntrinsics) -> Vector2<f64> {
        k.ray_to_pixel(&self.ray)
    }

    /// `(r_s / id_s) · n_s`, the denominator of the plane inverse depth.
    #[inline]
    pub fn plane_offset(&self) -> f64 {
        (self.ray / self.inv_depth).dot(&self.normal)
    }

    /// Inverse depth at which `ray_u` meets the surfel's plane.
    #[inline]
    pub fn inverse_depth_along(&self, ray_u: &Vector3<f64>) -> Result<f64, SurfelError> {
        let den = self.plane_offset();
        if den.abs() < DEGENERATE_DENOMINATOR {
            return Err(SurfelError::DegeneratePlane);
        }
        let id = ray_u.dot(&self.normal) / den;
        if id > 0.0 && id.is_finite() {
            Ok(id)
        } else {
            Err(SurfelError::PlaneBehindCamera)
        }
    }

    pub fn is_valid(&self) -> bool {
        self.inv_depth > 0.0
            && self.inv_depth.is_finite()
            && (self.normal.norm() - 1.0).abs() < 1e-9
            && self.normal.dot(&self.ray) < 0.0
    }
}

/// Inverse depth of pixel `u` on the plane of surfel `s`.
pub fn plane_inverse_depth(s: &Surfel, u: &Vector2<f64>, k: &CameraIntrinsics) -> Result<f64, SurfelError> {
    s.inverse_depth_along(&k.backproject_ray(u))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap()
    }

    #[test]
    fn fronto_parallel_plane_is_constant() {
        let s = Surfel::new(
            0,
            Vector3::new(0.0, 0.0, 1.0),
            0.5,
            Vector3::new(0.0, 0.0, -1.0),
            10.0,
            0,
        );
        for (x, y) in [(0.0, 0.0), (320.0, 240.0), (639.0, 479.0), (100.5, 33.25)] {
            let id = plane_inverse_depth(&s, &Vector2::new(x, y), &k()).unwrap();
            assert!((id - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn plane_passes_through_center() {
        let s = Surfel::new(
            0,
            Vector3::new(0.2, -0.1, 1.0),
            0.7,
            Vector3::new(0.3, 0.2, -1.0),
            10.0,
            0,
        );
        let u = s.center_pixel(&k());
        let id = plane_inverse_depth(&s, &u, &k()).unwrap();
        assert!((id - 0.7).abs() < 1e-12);
    }

    #[test]
    fn constructor_orients_normal() {
        let s = Surfel::new(0, Vector3::new(0.0, 0.0, 2.0), 1.0, Vector3::new(0.0, 0.0, 3.0), 5.0, 0);
        assert_eq!(s.ray, Vector3::new(0.0, 0.0, 1.0));
        assert_eq!(s.normal, Vector3::new(0.0, 0.0, -1.0));
        assert!(s.is_valid());
    }

    #[test]
    fn degenerate_and_behind_planes() {
        // normal perpendicular to the viewing ray: the plane contains the origin
        let s = Surfel {
            id: 0,
            ray: Vector3::new(0.0, 0.0, 1.0),
            inv_depth: 1.0,
            normal: Vector3::new(1.0, 0.0, 0.0),
            radius_px: 10.0,
            last_residual: 0.0,
            last_seen: 0,
        };
        assert_eq!(
            s.inverse_depth_along(&Vector3::new(0.1, 0.0, 1.0)),
            Err(SurfelError::DegeneratePlane)
        );
        // steep plane: rays on the far side of its horizon never hit it
        let s = Surfel::new(
            0,
            Vector3::new(0.0, 0.0, 1.0),
            1.0,
            Vector3::new(1.0, 0.0, -0.1),
            10.0,
            0,
        );
        assert_eq!(
            s.inverse_depth_along(&Vector3::new(0.5, 0.0, 1.0)),
            Err(SurfelError::PlaneBehindCamera)
        );
    }

    #[test]
    fn point_lies_on_plane() {
        let s = Surfel::new(
            3,
            Vector3::new(-0.15, 0.05, 1.0),
            0.4,
            Vector3::new(-0.4, 0.5, -0.8),
            10.0,
            0,
        );
        for (x, y) in [(100.0, 100.0), (250.0, 260.0), (400.0, 20.0)] {
            let r = k().backproject_ray(&Vector2::new(x, y));
            let id = s.inverse_depth_along(&r).unwrap();
            let residual = s.normal.dot(&(s.position() - r / id));
            assert!(residual.abs() < 1e-9, "{residual}");
        }
    }
}
