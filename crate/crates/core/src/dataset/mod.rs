//! Sequence ingestion (calibration, TUM trajectories, image folders) and
//! export of depth maps, normal maps and point clouds.

mod calibration;
mod export;
mod manifest;
mod tum;

pub use calibration::{load_calibration, parse_calibration, write_calibration};
pub use export::{
    read_pfm, read_ply, write_depth_pfm, write_depth_png, write_normal_png, write_pfm, write_ply, PlyVertex,
};
pub use manifest::{load_gray_image, write_gray_image, Association, DatasetManifest};
pub use tum::{format_trajectory, load_trajectory, parse_trajectory, write_trajectory};

use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Image { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
}

impl DatasetError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn parse(path: &Path, line: usize, message: impl Into<String>) -> Self {
        Self::Parse {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }
}

/// Meaningful lines of a text file as `(1-based line number, trimmed text)`;
/// blank lines and `#` comments are skipped.
pub(crate) fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub(crate) fn read_text(path: &Path) -> Result<String, DatasetError> {
    std::fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    std::fs::write(path, bytes).map_err(|e| DatasetError::io(path, e))
}
