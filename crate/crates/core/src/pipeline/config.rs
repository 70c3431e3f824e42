use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::optimizer::OptimizerConfig;
use crate::surfel::InitParams;
use crate::synthetic::SceneSpec;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("unknown setting {0:?}")]
    UnknownKey(String),
    #[error("invalid value {value:?} for {key}: {reason}")]
    InvalidValue { key: String, value: String, reason: String },
    #[error("{path}:{line}: expected `key = value`")]
    Syntax { path: String, line: usize },
    #[error("{0}")]
    Invalid(String),
}

/// Where frames come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    /// A directory in the dataset layout (see `DatasetManifest::from_root`).
    Dataset(PathBuf),
    /// Frames rendered on the fly.
    Synthetic(SceneSpec),
}

/// When to hand the surfels over to a new keyframe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyframePolicy {
    /// Trigger when `|t| · mean inverse depth` of the current frame relative
    /// to the keyframe exceeds this.
    pub max_scaled_translation: f64,
    /// Trigger when this many frames have passed since the keyframe.
    pub max_age: u64,
}

impl Default for KeyframePolicy {
    fn default() -> Self {
        Self {
            max_scaled_translation: 0.15,
            max_age: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrunePolicy {
    /// Surfels whose cost per observation exceeds this are removed.
    pub max_residual: f64,
    /// Surfels not optimized for this many frames are removed.
    pub max_age: u64,
}

impl Default for PrunePolicy {
    fn default() -> Self {
        Self {
            max_residual: 2e-3,
            max_age: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: Source,
    pub optimizer: OptimizerConfig,
    pub radius_px: f64,
    pub init: InitParams,
    pub keyframe: KeyframePolicy,
    pub prune: PrunePolicy,
    /// Artifacts go here; `None` runs without writing anything.
    pub output_dir: Option<PathBuf>,
    /// Export every this many frames (and always after the last); 0 = only
    /// after the last.
    pub export_every: usize,
    /// Seeds image noise of synthetic sources.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            source: Source::Synthetic(SceneSpec::default()),
            optimizer: OptimizerConfig::default(),
            radius_px: 10.0,
            init: InitParams::default(),
            keyframe: KeyframePolicy::default(),
            prune: PrunePolicy::default(),
            output_dir: None,
            export_every: 0,
            seed: 0,
        }
    }
}

const SCENE_KEYS: [&str; 12] = [
    "scene",
    "trajectory",
    "frames",
    "step",
    "texture_seed",
    "texture_waves",
    "min_wavelength",
    "max_wavelength",
    "noise_sigma",
    "width",
    "height",
    "focal",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| ConfigError::InvalidValue {
        key: key.to_owned(),
        value: value.to_owned(),
        reason: e.to_string(),
    })
}

fn parse_switch(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(ConfigError::InvalidValue {
            key: key.to_owned(),
            value: value.to_owned(),
            reason: "expected on/off".into(),
        }),
    }
}

impl RunConfig {
    /// Every key accepted by [`RunConfig::set`].
    pub const KEYS: &'static [&'static str] = &[
        "dataset",
        "scene",
        "trajectory",
        "frames",
        "step",
        "texture_seed",
        "texture_waves",
        "min_wavelength",
        "max_wavelength",
        "noise_sigma",
        "width",
        "height",
        "focal",
        "radius",
        "alpha",
        "beta",
        "bootstrap_inv_depth",
        "max_surfels",
        "huber_delta",
        "lambda",
        "max_iterations",
        "min_valid_pixels",
        "window_size",
        "convergence_eps",
        "normals",
        "keyframe_translation",
        "keyframe_max_age",
        "prune_max_residual",
        "prune_max_age",
        "export_every",
        "output",
        "seed",
    ];

    /// Applies one `key = value` setting. Scene keys switch the source to
    /// synthetic; `dataset` switches it to a directory.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        if SCENE_KEYS.contains(&key) {
            if let Source::Dataset(_) = self.source {
                self.source = Source::Synthetic(SceneSpec::default());
            }
            let Source::Synthetic(spec) = &mut self.source else {
                unreachable!()
            };
            return match key {
                "scene" => parse(key, value).map(|v| spec.scene = v),
                "trajectory" => parse(key, value).map(|v| spec.trajectory = v),
                "frames" => parse(key, value).map(|v| spec.frames = v),
                "step" => parse(key, value).map(|v| spec.step = v),
                "texture_seed" => parse(key, value).map(|v| spec.texture_seed = v),
                "texture_waves" => parse(key, value).map(|v| spec.texture_waves = v),
                "min_wavelength" => parse(key, value).map(|v| spec.min_wavelength = v),
                "max_wavelength" => parse(key, value).map(|v| spec.max_wavelength = v),
                "noise_sigma" => parse(key, value).map(|v| spec.noise_sigma = v),
                "width" => parse(key, value).map(|v| spec.width = v),
                "height" => parse(key, value).map(|v| spec.height = v),
                "focal" => parse(key, value).map(|v| spec.focal = v),
                _ => unreachable!(),
            };
        }
        let o = &mut self.optimizer;
        match key {
            "dataset" => self.source = Source::Dataset(PathBuf::from(value)),
            "radius" => self.radius_px = parse(key, value)?,
            "alpha" => self.init.alpha = parse(key, value)?,
            "beta" => self.init.beta = parse(key, value)?,
            "bootstrap_inv_depth" => self.init.bootstrap_inv_depth = parse(key, value)?,
            "max_surfels" => self.init.max_surfels = parse(key, value)?,
            "huber_delta" => o.huber_delta = parse(key, value)?,
            "lambda" => o.lm_lambda_init = parse(key, value)?,
            "max_iterations" => o.max_iterations = parse(key, value)?,
            "min_valid_pixels" => o.min_valid_pixels = parse(key, value)?,
            "window_size" => o.window_size = parse(key, value)?,
            "convergence_eps" => o.convergence_eps = parse(key, value)?,
            "normals" => o.normal_jacobian_enabled = parse_switch(key, value)?,
            "keyframe_translation" => self.keyframe.max_scaled_translation = parse(key, value)?,
            "keyframe_max_age" => self.keyframe.max_age = parse(key, value)?,
            "prune_max_residual" => self.prune.max_residual = parse(key, value)?,
            "prune_max_age" => self.prune.max_age = parse(key, value)?,
            "export_every" => self.export_every = parse(key, value)?,
            "output" => self.output_dir = Some(PathBuf::from(value)),
            "seed" => self.seed = parse(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.to_owned())),
        }
        Ok(())
    }

    /// Applies a `key = value` text; blank lines and `#` comments are
    /// ignored. `origin` labels errors.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), ConfigError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax {
                path: origin.to_owned(),
                line: i + 1,
            })?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))?;
        self.apply_text(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.optimizer
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.radius_px >= 2.0) {
            return Err(ConfigError::Invalid("radius must be at least 2 pixels".into()));
        }
        let i = &self.init;
        if !(i.alpha > 0.0 && i.beta > 0.0 && i.bootstrap_inv_depth > 0.0) {
            return Err(ConfigError::Invalid(
                "alpha, beta and bootstrap_inv_depth must be positive".into(),
            ));
        }
        if let Source::Synthetic(s) = &self.source {
            if s.frames == 0 || s.width < 8 || s.height < 8 || !(s.focal > 0.0) {
                return Err(ConfigError::Invalid(
                    "synthetic scene needs frames > 0, a focal length and at least 8x8 pixels".into(),
                ));
            }
            if !(s.min_wavelength > 0.0 && s.max_wavelength >= s.min_wavelength) {
                return Err(ConfigError::Invalid("wavelengths must satisfy 0 < min <= max".into()));
            }
        }
        Ok(())
    }
}
