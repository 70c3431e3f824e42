use nalgebra::{Vector2, Vector3, Vector4};

use crate::geometry::CameraIntrinsics;
use crate::surfel::{Surfel, SurfelError};

/// Plane-induced inverse depth along `ray_u` together with its gradient
/// with respect to `[n_x, n_y, n_z, id_s]`.
///
/// With `a = r_u·n` and `b = r_s·n`, `id_u = id_s·a/b`, so
/// `∂id_u/∂id_s = a/b` and `∂id_u/∂n = id_s·(r_u·b − a·r_s)/b²`. The normal
/// block is orthogonal to `n`: scaling the normal does not move the plane.
#[inline]
pub(crate) fn inverse_depth_and_gradient(s: &Surfel, ray_u: &Vector3<f64>) -> Result<(f64, Vector4<f64>), SurfelError> {
    let id_u = s.inverse_depth_along(ray_u)?;
    let a = ray_u.dot(&s.normal);
    let b = s.ray.dot(&s.normal);
    let dn = (ray_u * b - s.ray * a) * (s.inv_depth / (b * b));
    Ok((id_u, Vector4::new(dn.x, dn.y, dn.z, a / b)))
}

/// Gradient of the plane-induced inverse depth at pixel `u` with respect to
/// the surfel normal (first three entries) and inverse depth (last entry).
/// When `normal_enabled` is false the normal block is zeroed, which freezes
/// the normal during optimization.
pub fn jacobian_inverse_depth(
    s: &Surfel,
    u: &Vector2<f64>,
    k: &CameraIntrinsics,
    normal_enabled: bool,
) -> Result<Vector4<f64>, SurfelError> {
    let (_, mut d) = inverse_depth_and_gradient(s, &k.backproject_ray(u))?;
    if !normal_enabled {
        d.x = 0.0;
        d.y = 0.0;
        d.z = 0.0;
    }
    Ok(d)
}
