use nalgebra::{Vector2, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::PipelineError;
use crate::geometry::{CameraIntrinsics, Pose};
use crate::optimizer::{jacobian_inverse_depth, FootprintPixel, OptimizerConfig, PhotometricProblem};
use crate::surfel::{plane_inverse_depth, Surfel};
use crate::synthetic::{PlanePatch, PlaneScene, SceneView, Texture};

/// Largest tolerated relative difference between analytic and
/// finite-difference gradients.
pub const JACOBIAN_TOLERANCE: f64 = 1e-4;

const FOOTPRINT_RADIUS: f64 = 6.0;
const FRAMES: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct JacobianReport {
    pub trials: usize,
    /// Worst relative error of `∂id_u/∂[n, id_s]`, normal and depth blocks
    /// measured separately.
    pub max_inverse_depth_error: f64,
    /// Worst relative error of the photometric cost gradient.
    pub max_cost_gradient_error: f64,
    /// Trials exceeding [`JACOBIAN_TOLERANCE`].
    pub failures: usize,
}

impl JacobianReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Compares analytic Jacobians against central finite differences on
/// random planar scenes, surfels and window poses.
pub fn check_jacobians(seed: u64, trials: usize) -> Result<JacobianReport, PipelineError> {
    check_jacobians_scaled(seed, trials, 1.0)
}

/// As [`check_jacobians`], with the analytic normal Jacobian of the cost
/// multiplied by `normal_scale` to test that the check can fail.
pub fn check_jacobians_scaled(seed: u64, trials: usize, normal_scale: f64) -> Result<JacobianReport, PipelineError> {
    if trials == 0 {
        return Err(PipelineError::Usage("check-jacobians needs at least one trial".into()));
    }
    let mut report = JacobianReport {
        trials,
        max_inverse_depth_error: 0.0,
        max_cost_gradient_error: 0.0,
        failures: 0,
    };
    let k = CameraIntrinsics::new(150.0, 150.0, 79.5, 59.5, 160, 120).expect("valid");
    let cfg = OptimizerConfig::default();
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(trial as u64));
        let (e_id, e_cost) = loop {
            if let Some(errors) = run_trial(&mut rng, &k, &cfg, normal_scale) {
                break errors;
            }
        };
        report.max_inverse_depth_error = report.max_inverse_depth_error.max(e_id);
        report.max_cost_gradient_error = report.max_cost_gradient_error.max(e_cost);
        if !(e_id <= JACOBIAN_TOLERANCE && e_cost <= JACOBIAN_TOLERANCE) {
            report.failures += 1;
        }
    }
    Ok(report)
}

fn relative(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(1e-12)
}

/// Errors of the normal and depth blocks, whichever is worse.
fn block_error(analytic: &Vector4<f64>, fd: &Vector4<f64>) -> f64 {
    relative(&[analytic.x, analytic.y, analytic.z], &[fd.x, fd.y, fd.z]).max(relative(&[analytic.w], &[fd.w]))
}

fn random_unit_near(rng: &mut ChaCha8Rng, axis: &Vector3<f64>, max_deg: f64) -> Vector3<f64> {
    let v = Vector3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    let perp = (v - axis * v.dot(axis)).normalize();
    let angle = rng.random_range(0.0..max_deg).to_radians();
    (axis * angle.cos() + perp * angle.sin()).normalize()
}

/// One trial; `None` when the random draw is unusable (a sample leaves a
/// frame during differencing) and must be redrawn.
fn run_trial(
    rng: &mut ChaCha8Rng,
    k: &CameraIntrinsics,
    cfg: &OptimizerConfig,
    normal_scale: f64,
) -> Option<(f64, f64)> {
    let depth = rng.random_range(1.5..4.0);
    let plane_normal = random_unit_near(rng, &Vector3::new(0.0, 0.0, -1.0), 50.0);
    let texture = Texture::random(rng.random(), 5, 0.15, 0.6);
    let scene = PlaneScene::new(
        vec![PlanePatch::infinite(Vector3::new(0.0, 0.0, depth), plane_normal)],
        texture,
    );

    let center = Vector2::new(rng.random_range(40.0..120.0), rng.random_range(30.0..90.0));
    let ray_s = k.backproject_ray(&center);
    let truth = ray_s.dot(&plane_normal) / (Vector3::new(0.0, 0.0, depth).dot(&plane_normal));
    let mut s = Surfel::new(
        0,
        ray_s,
        truth * rng.random_range(0.9..1.1),
        random_unit_near(rng, &plane_normal, 15.0),
        FOOTPRINT_RADIUS,
        0,
    );
    // a raw normal off the unit sphere exercises the scale invariance
    s.normal *= rng.random_range(0.8..1.25);

    // ∂id_u/∂[n, id_s] at an off-center pixel
    let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let u = center + Vector2::new(angle.cos(), angle.sin()) * rng.random_range(2.0..FOOTPRINT_RADIUS);
    let analytic = jacobian_inverse_depth(&s, &u, k, true).ok()?;
    let fd = central_difference(&s, |t| plane_inverse_depth(t, &u, k).ok())?;
    let e_id = block_error(&analytic, &fd);

    // gradient of the full photometric cost
    let kf_view = SceneView::new(&scene, Pose::identity(), *k);
    let poses: Vec<Pose> = (0..FRAMES)
        .map(|_| {
            let w = Vector3::new(
                rng.random_range(-0.03..0.03),
                rng.random_range(-0.03..0.03),
                rng.random_range(-0.03..0.03),
            );
            let t = Vector3::new(
                rng.random_range(-0.1..0.1),
                rng.random_range(-0.1..0.1),
                rng.random_range(-0.1..0.1),
            );
            Pose::from_axis_angle(w, t)
        })
        .collect();
    let views: Vec<SceneView> = poses.iter().map(|p| SceneView::new(&scene, p.inverse(), *k)).collect();
    let mut pixels = Vec::new();
    let r = FOOTPRINT_RADIUS as i64;
    for dy in -r..=r {
        for dx in -r..=r {
            let p = Vector2::new(center.x.round() + dx as f64, center.y.round() + dy as f64);
            if (p - center).norm() >= FOOTPRINT_RADIUS {
                continue;
            }
            use crate::geometry::ImageSampler;
            let (reference, _) = kf_view.sample(&p)?;
            pixels.push(FootprintPixel {
                ray: k.backproject_ray(&p),
                reference,
            });
        }
    }
    let mut problem = PhotometricProblem::new(k, views.iter().zip(&poses).map(|(v, p)| (v, *p)), cfg);
    problem.normal_jacobian_scale = normal_scale;
    let eq = problem.accumulate_normal_equations(&s, &pixels);
    let full = pixels.len() * FRAMES;
    if eq.valid != full {
        return None;
    }
    let fd = central_difference(&s, |t| {
        let (c, valid) = problem.surfel_cost(t, &pixels);
        (valid == full).then_some(c)
    })?;
    let e_cost = block_error(&eq.g, &fd);
    Some((e_id, e_cost))
}

/// Central differences in the raw parameters `[n_x, n_y, n_z, id_s]`.
fn central_difference(s: &Surfel, f: impl Fn(&Surfel) -> Option<f64>) -> Option<Vector4<f64>> {
    let mut out = Vector4::zeros();
    for i in 0..4 {
        let h = if i < 3 { 1e-6 } else { 1e-6 * s.inv_depth };
        let eval = |delta: f64| {
            let mut t = s.clone();
            if i < 3 {
                t.normal[i] += delta;
            } else {
                t.inv_depth += delta;
            }
            f(&t)
        };
        out[i] = (eval(h)? - eval(-h)?) / (2.0 * h);
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_trials_is_a_usage_error() {
        assert!(matches!(check_jacobians(1, 0), Err(PipelineError::Usage(_))));
    }

    #[test]
    fn passes_and_detects_a_one_percent_corruption() {
        let ok = check_jacobians(3, 20).unwrap();
        assert!(ok.passed(), "{ok:?}");
        let bad = check_jacobians_scaled(3, 20, 1.01).unwrap();
        assert!(!bad.passed());
        assert_eq!(bad.max_inverse_depth_error, ok.max_inverse_depth_error);
    }
}
