use nalgebra::{Matrix2x3, Matrix3, Vector2, Vector3};

use super::GeometryError;

/// Pinhole intrinsics of a distortion-free camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self, GeometryError> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let finite = [self.fx, self.fy, self.cx, self.cy].iter().all(|v| v.is_finite());
        if !finite {
            return Err(GeometryError::InvalidIntrinsics("non-finite value".into()));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "focal lengths must be positive (fx = {}, fy = {})",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(GeometryError::InvalidIntrinsics("empty image size".into()));
        }
        if !(self.cx > 0.0 && self.cx < self.width as f64) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "cx = {} outside (0, {})",
                self.cx, self.width
            )));
        }
        if !(self.cy > 0.0 && self.cy < self.height as f64) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "cy = {} outside (0, {})",
                self.cy, self.height
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.fx, 0.0, self.cx, //
            0.0, self.fy, self.cy, //
            0.0, 0.0, 1.0,
        )
    }

    /// Ray `K⁻¹·[u_x, u_y, 1]ᵀ` through pixel `u`; its z component is 1.
    #[inline]
    pub fn backproject_ray(&self, u: &Vector2<f64>) -> Vector3<f64> {
        Vector3::new((u.x - self.cx) / self.fx, (u.y - self.cy) / self.fy, 1.0)
    }

    /// Projects a camera-frame point to pixel coordinates.
    #[inline]
    pub fn project(&self, p: &Vector3<f64>) -> Result<Vector2<f64>, GeometryError> {
        if p.z <= 0.0 {
            return Err(GeometryError::BehindCamera(p.z));
        }
        Ok(Vector2::new(
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        ))
    }

    /// Pixel of a ray with z = 1.
    #[inline]
    pub fn ray_to_pixel(&self, ray: &Vector3<f64>) -> Vector2<f64> {
        Vector2::new(self.fx * ray.x + self.cx, self.fy * ray.y + self.cy)
    }

    pub fn contains(&self, u: &Vector2<f64>, margin: f64) -> bool {
        u.x >= -margin
            && u.y >= -margin
            && u.x <= self.width as f64 - 1.0 + margin
            && u.y <= self.height as f64 - 1.0 + margin
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

/// Jacobian of `[x/z, y/z]` with respect to `[x, y, z]`.
#[inline]
pub fn dehomogenization_jacobian(q: &Vector3<f64>) -> Matrix2x3<f64> {
    let iz = 1.0 / q.z;
    let iz2 = iz * iz;
    Matrix2x3::new(
        iz,
        0.0,
        -q.x * iz2, //
        0.0,
        iz,
        -q.y * iz2,
    )
}
