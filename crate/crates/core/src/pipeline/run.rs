use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use super::{PipelineError, RunConfig, Source};
use crate::dataset::{load_gray_image, write_depth_pfm, write_depth_png, write_normal_png, write_ply, DatasetManifest};
use crate::geometry::{CameraIntrinsics, GrayImage, Pose};
use crate::optimizer::{optimize_keyframe, Frame, OptimizeStats};
use crate::surfel::{
    change_reference_frame, initialize_surfels, prune_surfels, rasterize, write_surfel_map, Keyframe, RasterBuffers,
    SurfelMapHeader,
};
use crate::synthetic::{add_noise, evaluate_reconstruction, render, PlaneScene, ReconstructionMetrics};

/// One line of the metrics log.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FrameRecord {
    pub frame: usize,
    pub timestamp: f64,
    /// Index of the keyframe the frame was processed against.
    pub keyframe: usize,
    /// The frame could not be used (bad pose, size or timestamp).
    pub skipped: bool,
    pub surfels: usize,
    pub optimized: usize,
    pub converged_fraction: f64,
    pub mean_cost_before: f64,
    pub mean_cost_after: f64,
    pub iterations: usize,
    pub pruned: usize,
    pub created: usize,
    pub coverage: f64,
    /// The frame became the new keyframe after being processed.
    pub new_keyframe: bool,
    pub handover_dropped: usize,
}

/// Per-frame driver: window update, surfel optimization, pruning, hole
/// filling and keyframe changes.
pub struct Pipeline {
    cfg: RunConfig,
    intrinsics: CameraIntrinsics,
    kf: Option<Keyframe>,
    keyframe_index: usize,
    keyframe_start: usize,
    frames_seen: usize,
}

impl Pipeline {
    pub fn new(cfg: RunConfig, intrinsics: CameraIntrinsics) -> Self {
        Self {
            cfg,
            intrinsics,
            kf: None,
            keyframe_index: 0,
            keyframe_start: 0,
            frames_seen: 0,
        }
    }

    pub fn keyframe(&self) -> Option<&Keyframe> {
        self.kf.as_ref()
    }

    /// Processes one frame up to, but excluding, the keyframe decision. The
    /// first frame becomes the keyframe and is seeded with bootstrap
    /// surfels.
    pub fn observe(&mut self, image: &GrayImage, world_from_camera: Pose, timestamp: f64) -> FrameRecord {
        let index = self.frames_seen;
        self.frames_seen += 1;
        let mut rec = FrameRecord {
            frame: index,
            timestamp,
            keyframe: self.keyframe_index,
            ..Default::default()
        };

        let Some(kf) = self.kf.as_mut() else {
            if !world_from_camera.is_finite()
                || image.width() != self.intrinsics.width
                || image.height() != self.intrinsics.height
            {
                log::warn!("frame {index}: unusable as first keyframe, skipped");
                rec.skipped = true;
                return rec;
            }
            let mut kf = Keyframe::new(
                image.clone(),
                world_from_camera,
                self.intrinsics,
                timestamp,
                self.cfg.radius_px,
                self.cfg.optimizer.window_size,
            );
            kf.frame_count = index as u64;
            rec.created = fill_holes(&mut kf, &self.cfg);
            self.keyframe_start = index;
            self.kf = Some(kf);
            self.finish(&mut rec, &OptimizeStats::default());
            return rec;
        };

        kf.frame_count = index as u64;
        let kf_to_frame = world_from_camera.inverse().compose(&kf.pose);
        if let Err(e) = kf.push_frame(Frame::new(image.clone(), kf_to_frame, timestamp)) {
            log::warn!("frame {index}: {e}; skipped");
            rec.skipped = true;
            self.finish(&mut rec, &OptimizeStats::default());
            return rec;
        }
        let stats = optimize_keyframe(kf, &self.cfg.optimizer);
        rec.pruned = prune_surfels(kf, self.cfg.prune.max_residual, self.cfg.prune.max_age);
        rec.created = fill_holes(kf, &self.cfg);
        self.finish(&mut rec, &stats);
        rec
    }

    fn finish(&self, rec: &mut FrameRecord, stats: &OptimizeStats) {
        let kf = self.kf.as_ref().expect("keyframe exists");
        rec.surfels = kf.surfels.len();
        rec.optimized = stats.optimized;
        rec.converged_fraction = stats.converged_fraction();
        rec.mean_cost_before = stats.mean_cost_before;
        rec.mean_cost_after = stats.mean_cost_after;
        rec.iterations = stats.total_iterations;
        rec.coverage = rasterize(kf).valid_count() as f64 / self.intrinsics.pixel_count() as f64;
    }

    /// Hands the surfels over to the last observed frame when the keyframe
    /// policy triggers. Returns whether it did.
    pub fn maybe_change_keyframe(&mut self, rec: &mut FrameRecord, image: &GrayImage, world_from_camera: Pose) -> bool {
        let Some(kf) = self.kf.as_ref() else {
            return false;
        };
        if rec.skipped || rec.frame == self.keyframe_start {
            return false;
        }
        let kf_to_frame = world_from_camera.inverse().compose(&kf.pose);
        let mean_id = kf.mean_inverse_depth().unwrap_or(self.cfg.init.bootstrap_inv_depth);
        let policy = &self.cfg.keyframe;
        let moved = kf_to_frame.translation.norm() * mean_id > policy.max_scaled_translation;
        let aged = (rec.frame - self.keyframe_start) as u64 >= policy.max_age;
        if !(moved || aged) {
            return false;
        }
        let kf = self.kf.take().expect("checked above");
        let (mut kf, stats) = change_reference_frame(kf, &kf_to_frame, image.clone(), rec.timestamp);
        rec.handover_dropped = stats.dropped_behind + stats.dropped_outside;
        rec.created += fill_holes(&mut kf, &self.cfg);
        rec.new_keyframe = true;
        rec.surfels = kf.surfels.len();
        self.kf = Some(kf);
        self.keyframe_index += 1;
        self.keyframe_start = rec.frame;
        true
    }
}

fn fill_holes(kf: &mut Keyframe, cfg: &RunConfig) -> usize {
    let buffers = rasterize(kf);
    let new = initialize_surfels(kf, &buffers, &cfg.init);
    let n = new.len();
    kf.append_surfels(new);
    n
}

/// Outcome of a whole run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub records: Vec<FrameRecord>,
    pub keyframes: usize,
    /// Accuracy of the last keyframe after the last frame (synthetic sources
    /// only).
    pub final_metrics: Option<ReconstructionMetrics>,
    pub artifacts: Vec<PathBuf>,
}

/// A sequence ready to iterate.
pub(crate) struct FrameSource {
    pub intrinsics: CameraIntrinsics,
    pub scene: Option<PlaneScene>,
    kind: SourceKind,
}

enum SourceKind {
    Dataset(Vec<(f64, Pose, PathBuf)>),
    Synthetic {
        spec: crate::synthetic::SceneSpec,
        trajectory: crate::synthetic::Trajectory,
        seed: u64,
    },
}

impl FrameSource {
    pub fn open(cfg: &RunConfig) -> Result<Self, PipelineError> {
        match &cfg.source {
            Source::Dataset(root) => {
                let manifest = DatasetManifest::from_root(root);
                let intrinsics = manifest.load_calibration()?;
                let assoc = manifest.associate()?;
                Ok(Self {
                    intrinsics,
                    scene: None,
                    kind: SourceKind::Dataset(assoc.frames),
                })
            }
            Source::Synthetic(spec) => Ok(Self {
                intrinsics: spec.intrinsics(),
                scene: Some(spec.build_scene()),
                kind: SourceKind::Synthetic {
                    spec: spec.clone(),
                    trajectory: spec.build_trajectory(),
                    seed: cfg.seed,
                },
            }),
        }
    }

    pub fn len(&self) -> usize {
        match &self.kind {
            SourceKind::Dataset(f) => f.len(),
            SourceKind::Synthetic { trajectory, .. } => trajectory.len(),
        }
    }

    pub fn frame(&self, i: usize) -> Result<(f64, Pose, GrayImage), PipelineError> {
        match &self.kind {
            SourceKind::Dataset(frames) => {
                let (t, pose, path) = &frames[i];
                Ok((*t, *pose, load_gray_image(path)?))
            }
            SourceKind::Synthetic { spec, trajectory, seed } => {
                let (t, pose) = trajectory.entries()[i];
                let scene = self.scene.as_ref().expect("synthetic scene");
                let image = render(scene, &pose, &self.intrinsics).image;
                let noise_seed = seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
                Ok((t, pose, add_noise(&image, spec.noise_sigma, noise_seed)))
            }
        }
    }
}

/// Runs the pipeline over the configured sequence. With an output
/// directory, writes `metrics.jsonl` (deterministic), `timings.jsonl`
/// (wall-clock, not deterministic), `summary.json` and the periodic
/// exports.
pub fn run(cfg: &RunConfig) -> Result<RunSummary, PipelineError> {
    cfg.validate()?;
    let source = FrameSource::open(cfg)?;
    let n = source.len();
    if n == 0 {
        return Err(PipelineError::EmptySequence);
    }
    let out = match &cfg.output_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
            Some(dir.as_path())
        }
        None => None,
    };
    let mut metrics_log = out.map(|d| LineLog::create(&d.join("metrics.jsonl"))).transpose()?;
    let mut timings_log = out.map(|d| LineLog::create(&d.join("timings.jsonl"))).transpose()?;

    let mut pipeline = Pipeline::new(cfg.clone(), source.intrinsics);
    let mut summary = RunSummary {
        records: Vec::with_capacity(n),
        keyframes: 1,
        final_metrics: None,
        artifacts: Vec::new(),
    };
    for i in 0..n {
        let started = Instant::now();
        let (t, pose, image) = source.frame(i)?;
        let mut rec = pipeline.observe(&image, pose, t);

        let last = i + 1 == n;
        let export = last || (cfg.export_every > 0 && (i + 1) % cfg.export_every == 0);
        if export {
            if let Some(kf) = pipeline.keyframe() {
                let buffers = rasterize(kf);
                if let Some(scene) = &source.scene {
                    let metrics = evaluate_keyframe(kf, &buffers, scene);
                    if last {
                        summary.final_metrics = metrics;
                    }
                }
                if let Some(dir) = out {
                    summary.artifacts.extend(export_keyframe(dir, i, kf, &buffers)?);
                }
            }
        }

        if pipeline.maybe_change_keyframe(&mut rec, &image, pose) {
            summary.keyframes += 1;
        }
        let seconds = started.elapsed().as_secs_f64();
        log::info!(
            "frame {i}: {} surfels, cost {:.3e} -> {:.3e}, {:.2} s{}",
            rec.surfels,
            rec.mean_cost_before,
            rec.mean_cost_after,
            seconds,
            if rec.new_keyframe { ", new keyframe" } else { "" }
        );
        if let Some(log) = metrics_log.as_mut() {
            log.write(&serde_json::to_string(&rec).expect("record serializes"))?;
        }
        if let Some(log) = timings_log.as_mut() {
            log.write(&serde_json::json!({ "frame": i, "seconds": seconds }).to_string())?;
        }
        summary.records.push(rec);
    }

    if let Some(dir) = out {
        for log in [metrics_log, timings_log].into_iter().flatten() {
            summary.artifacts.push(log.finish()?);
        }
        let path = dir.join("summary.json");
        let text = serde_json::to_string_pretty(&summary_json(&summary)).expect("summary serializes");
        std::fs::write(&path, text + "\n").map_err(|e| PipelineError::io(&path, e))?;
        summary.artifacts.push(path);
    }
    Ok(summary)
}

/// Renders ground truth at the keyframe pose and scores the rasterized
/// surfels against it.
pub fn evaluate_keyframe(kf: &Keyframe, buffers: &RasterBuffers, scene: &PlaneScene) -> Option<ReconstructionMetrics> {
    let truth = render(scene, &kf.pose, &kf.intrinsics).truth;
    let normals = buffers.normals(&kf.surfels);
    let estimate: Vec<f64> = (0..buffers.inv_depth.len())
        .map(|i| if buffers.is_valid(i) { buffers.inv_depth[i] } else { 0.0 })
        .collect();
    evaluate_reconstruction(buffers.width, buffers.height, &estimate, Some(&normals), &truth).ok()
}

pub(crate) fn metrics_json(m: &ReconstructionMetrics) -> serde_json::Value {
    serde_json::json!({
        "inv_depth_rmse": m.inv_depth_rmse,
        "mean_rel_depth_error": m.mean_rel_depth_error,
        "mean_normal_error_deg": m.mean_normal_error_deg,
        "coverage": m.coverage,
        "joint_pixels": m.joint_pixels,
    })
}

fn summary_json(s: &RunSummary) -> serde_json::Value {
    serde_json::json!({
        "frames": s.records.len(),
        "keyframes": s.keyframes,
        "final_surfels": s.records.last().map_or(0, |r| r.surfels),
        "final_metrics": s.final_metrics.as_ref().map(metrics_json),
    })
}

fn export_keyframe(
    dir: &Path,
    frame: usize,
    kf: &Keyframe,
    buffers: &RasterBuffers,
) -> Result<Vec<PathBuf>, PipelineError> {
    let name = |stem: &str, ext: &str| dir.join(format!("{stem}_{frame:06}.{ext}"));
    let depth_pfm = name("depth", "pfm");
    write_depth_pfm(&depth_pfm, buffers)?;
    let depth_png = name("depth", "png");
    write_depth_png(&depth_png, buffers)?;
    let normals = name("normals", "png");
    write_normal_png(&normals, buffers, &buffers.normals(&kf.surfels))?;
    let cloud = name("cloud", "ply");
    write_ply(&cloud, kf, buffers)?;
    let surfels = name("surfels", "txt");
    let header = SurfelMapHeader {
        pose: kf.pose,
        intrinsics: kf.intrinsics,
        radius_px: kf.radius_px,
    };
    let file = File::create(&surfels).map_err(|e| PipelineError::io(&surfels, e))?;
    let mut w = BufWriter::new(file);
    write_surfel_map(&mut w, &header, &kf.surfels)
        .and_then(|_| w.flush())
        .map_err(|e| PipelineError::io(&surfels, e))?;
    let sidecar = depth_png.with_extension("txt");
    Ok(vec![depth_pfm, depth_png, sidecar, normals, cloud, surfels])
}

struct LineLog {
    path: PathBuf,
    out: BufWriter<File>,
}

impl LineLog {
    fn create(path: &Path) -> Result<Self, PipelineError> {
        let file = File::create(path).map_err(|e| PipelineError::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        })
    }

    fn write(&mut self, line: &str) -> Result<(), PipelineError> {
        writeln!(self.out, "{line}").map_err(|e| PipelineError::io(&self.path, e))
    }

    fn finish(mut self) -> Result<PathBuf, PipelineError> {
        self.out.flush().map_err(|e| PipelineError::io(&self.path, e))?;
        Ok(self.path)
    }
}
