use nalgebra::Vector3;
use thiserror::Error;

use super::GroundTruth;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("estimate is {0}x{1} but ground truth is {2}x{3}")]
    SizeMismatch(usize, usize, usize, usize),
    #[error("estimate and ground truth share no valid pixel")]
    EmptyOverlap,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionMetrics {
    /// RMSE of inverse depth over jointly valid pixels.
    pub inv_depth_rmse: f64,
    /// Mean of `|d_est − d_gt| / d_gt` over jointly valid pixels.
    pub mean_rel_depth_error: f64,
    /// Mean angle between estimated and true normals (degrees); `None` when
    /// no normals were supplied.
    pub mean_normal_error_deg: Option<f64>,
    /// Fraction of ground-truth-valid pixels that carry an estimate.
    pub coverage: f64,
    pub joint_pixels: usize,
}

/// Compares an estimated inverse-depth map (0 or non-finite = no estimate)
/// and optional per-pixel normals against ground truth.
pub fn evaluate_reconstruction(
    width: usize,
    height: usize,
    inv_depth: &[f64],
    normals: Option<&[Option<Vector3<f64>>]>,
    truth: &GroundTruth,
) -> Result<ReconstructionMetrics, EvalError> {
    if width != truth.width || height != truth.height || inv_depth.len() != width * height {
        return Err(EvalError::SizeMismatch(width, height, truth.width, truth.height));
    }
    let mut sq = 0.0;
    let mut rel = 0.0;
    let mut ang = 0.0;
    let mut n_ang = 0usize;
    let mut joint = 0usize;
    for i in 0..width * height {
        let est = inv_depth[i];
        if !truth.valid[i] || !(est > 0.0 && est.is_finite()) {
            continue;
        }
        let gt = truth.inv_depth[i];
        joint += 1;
        sq += (est - gt) * (est - gt);
        rel += ((1.0 / est) - (1.0 / gt)).abs() * gt;
        if let Some(n) = normals.and_then(|ns| ns[i]) {
            let c = n.normalize().dot(&truth.normals[i]).clamp(-1.0, 1.0);
            ang += c.acos().to_degrees();
            n_ang += 1;
        }
    }
    if joint == 0 {
        return Err(EvalError::EmptyOverlap);
    }
    let gt_valid = truth.valid_count();
    Ok(ReconstructionMetrics {
        inv_depth_rmse: (sq / joint as f64).sqrt(),
        mean_rel_depth_error: rel / joint as f64,
        mean_normal_error_deg: (normals.is_some() && n_ang > 0).then(|| ang / n_ang as f64),
        coverage: joint as f64 / gt_valid.max(1) as f64,
        joint_pixels: joint,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth() -> GroundTruth {
        let n = 12;
        GroundTruth {
            width: 4,
            height: 3,
            inv_depth: (0..n).map(|i| 0.2 + 0.05 * i as f64).collect(),
            normals: vec![Vector3::new(0.0, 0.0, -1.0); n],
            valid: (0..n).map(|i| i != 5).collect(),
        }
    }

    #[test]
    fn perfect_estimate() {
        let gt = truth();
        let normals: Vec<_> = gt.normals.iter().map(|n| Some(*n)).collect();
        let m = evaluate_reconstruction(4, 3, &gt.inv_depth, Some(&normals), &gt).unwrap();
        assert_eq!(m.inv_depth_rmse, 0.0);
        assert_eq!(m.mean_rel_depth_error, 0.0);
        assert_eq!(m.mean_normal_error_deg, Some(0.0));
        assert_eq!(m.coverage, 1.0);
        assert_eq!(m.joint_pixels, 11);
    }

    #[test]
    fn ten_percent_inverse_depth_bias() {
        let gt = truth();
        let est: Vec<f64> = gt.inv_depth.iter().map(|v| v * 1.1).collect();
        let m = evaluate_reconstruction(4, 3, &est, None, &gt).unwrap();
        assert!((m.mean_rel_depth_error - (1.0 - 1.0 / 1.1)).abs() < 1e-12);
        assert_eq!(m.mean_normal_error_deg, None);
    }

    #[test]
    fn normal_angle() {
        let gt = truth();
        let tilted = Vector3::new(1.0, 0.0, -1.0);
        let normals: Vec<_> = (0..12).map(|_| Some(tilted)).collect();
        let m = evaluate_reconstruction(4, 3, &gt.inv_depth, Some(&normals), &gt).unwrap();
        assert!((m.mean_normal_error_deg.unwrap() - 45.0).abs() < 1e-9);
    }

    #[test]
    fn empty_overlap_and_size_errors() {
        let gt = truth();
        assert_eq!(
            evaluate_reconstruction(4, 3, &[0.0; 12], None, &gt),
            Err(EvalError::EmptyOverlap)
        );
        assert!(matches!(
            evaluate_reconstruction(3, 4, &[0.0; 12], None, &gt),
            Err(EvalError::SizeMismatch(..))
        ));
        let mut half = gt.inv_depth.clone();
        half[..6].iter_mut().for_each(|v| *v = 0.0);
        let m = evaluate_reconstruction(4, 3, &half, None, &gt).unwrap();
        assert!((m.coverage - 6.0 / 11.0).abs() < 1e-15);
    }
}
