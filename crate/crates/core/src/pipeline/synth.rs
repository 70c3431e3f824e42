use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::PipelineError;
use crate::dataset::{format_trajectory, read_pfm, write_calibration, write_gray_image, write_pfm, DatasetManifest};
use crate::synthetic::{add_noise, evaluate_reconstruction, render, GroundTruth, ReconstructionMetrics, SceneSpec};

/// The scene description as `key = value` lines accepted by `RunConfig::apply_text`.
pub fn scene_spec_text(spec: &SceneSpec) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
    kv("scene", spec.scene.to_string());
    kv("trajectory", spec.trajectory.to_string());
    kv("frames", spec.frames.to_string());
    kv("step", spec.step.to_string());
    kv("texture_seed", spec.texture_seed.to_string());
    kv("texture_waves", spec.texture_waves.to_string());
    kv("min_wavelength", spec.min_wavelength.to_string());
    kv("max_wavelength", spec.max_wavelength.to_string());
    kv("noise_sigma", spec.noise_sigma.to_string());
    kv("width", spec.width.to_string());
    kv("height", spec.height.to_string());
    kv("focal", spec.focal.to_string());
    s
}

/// Renders `spec` into the dataset layout under `root`: 16-bit images named
/// by timestamp, `calibration.txt`, `trajectory.txt`, ground-truth inverse
/// depth as `depth_gt/<timestamp>.pfm`, and the scene description as `scene.cfg`.
pub fn write_synthetic_dataset(spec: &SceneSpec, seed: u64, root: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let manifest = DatasetManifest::from_root(root);
    let gt_dir = root.join("depth_gt");
    for dir in [&manifest.image_dir, &gt_dir] {
        std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    }
    let k = spec.intrinsics();
    let scene = spec.build_scene();
    let trajectory = spec.build_trajectory();
    let stamps: Vec<String> = trajectory.iter().map(|(t, _)| format!("{t:.6}")).collect();

    write_calibration(&manifest.calibration, &k)?;
    let text = format_trajectory(&trajectory, Some(&stamps));
    std::fs::write(&manifest.trajectory, text).map_err(|e| PipelineError::io(&manifest.trajectory, e))?;
    let cfg_path = root.join("scene.cfg");
    std::fs::write(&cfg_path, scene_spec_text(spec)).map_err(|e| PipelineError::io(&cfg_path, e))?;

    let written: Vec<Vec<PathBuf>> = trajectory
        .entries()
        .par_iter()
        .enumerate()
        .map(|(i, (_, pose))| -> Result<Vec<PathBuf>, PipelineError> {
            let r = render(&scene, pose, &k);
            let noise_seed = seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
            let image = add_noise(&r.image, spec.noise_sigma, noise_seed);
            let img_path = manifest.image_dir.join(format!("{}.png", stamps[i]));
            write_gray_image(&img_path, &image)?;
            let gt_path = gt_dir.join(format!("{}.pfm", stamps[i]));
            write_pfm(&gt_path, k.width, k.height, &r.truth.inv_depth)?;
            Ok(vec![img_path, gt_path])
        })
        .collect::<Result<_, _>>()?;
    let mut paths = vec![manifest.calibration, manifest.trajectory, cfg_path];
    paths.extend(written.into_iter().flatten());
    Ok(paths)
}

/// Compares an inverse-depth PFM against a reference PFM; pixels that are
/// zero or non-finite in either are ignored. Normals are not compared.
pub fn eval_pfm(estimate: &Path, truth: &Path) -> Result<ReconstructionMetrics, PipelineError> {
    let (w, h, est) = read_pfm(estimate)?;
    let (tw, th, gt) = read_pfm(truth)?;
    let truth = GroundTruth {
        width: tw,
        height: th,
        valid: gt.iter().map(|v| *v > 0.0 && v.is_finite()).collect(),
        normals: vec![nalgebra::Vector3::zeros(); gt.len()],
        inv_depth: gt,
    };
    Ok(evaluate_reconstruction(w, h, &est, None, &truth)?)
}
