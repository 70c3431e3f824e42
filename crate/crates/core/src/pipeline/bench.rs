use std::fmt::Write as _;

use super::{run, PipelineError, RunConfig, Source};
use crate::synthetic::ReconstructionMetrics;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub radius_px: f64,
    pub normals: bool,
    pub metrics: ReconstructionMetrics,
    pub surfels: usize,
}

/// Runs the pipeline once per radius with the normal Jacobian enabled and
/// once with it disabled, scoring the final keyframe against ground truth.
/// Rows are ordered by radius, normals-on first.
pub fn synth_bench(base: &RunConfig, radii: &[f64]) -> Result<Vec<BenchRow>, PipelineError> {
    if !matches!(base.source, Source::Synthetic(_)) {
        return Err(PipelineError::Usage("synth-bench needs a synthetic scene".into()));
    }
    if radii.is_empty() {
        return Err(PipelineError::Usage("synth-bench needs at least one radius".into()));
    }
    let mut rows = Vec::with_capacity(radii.len() * 2);
    for &radius in radii {
        for normals in [true, false] {
            let mut cfg = base.clone();
            cfg.radius_px = radius;
            cfg.optimizer.normal_jacobian_enabled = normals;
            cfg.output_dir = None;
            let summary = run(&cfg)?;
            let metrics = summary
                .final_metrics
                .ok_or(PipelineError::Eval(crate::synthetic::EvalError::EmptyOverlap))?;
            log::info!(
                "radius {radius} normals {}: rel depth {:.4}, normal {:.2} deg",
                if normals { "on" } else { "off" },
                metrics.mean_rel_depth_error,
                metrics.mean_normal_error_deg.unwrap_or(f64::NAN)
            );
            rows.push(BenchRow {
                radius_px: radius,
                normals,
                metrics,
                surfels: summary.records.last().map_or(0, |r| r.surfels),
            });
        }
    }
    Ok(rows)
}

pub fn format_bench_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from(
        "radius_px,normals,inv_depth_rmse,mean_rel_depth_error,mean_normal_error_deg,coverage,joint_pixels,surfels\n",
    );
    for r in rows {
        let m = &r.metrics;
        writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.radius_px,
            if r.normals { "on" } else { "off" },
            m.inv_depth_rmse,
            m.mean_rel_depth_error,
            m.mean_normal_error_deg.map_or(String::new(), |v| v.to_string()),
            m.coverage,
            m.joint_pixels,
            r.surfels
        )
        .unwrap();
    }
    s
}
