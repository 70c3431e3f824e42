//! End-to-end driver and the verification tools built on it.

mod bench;
mod check;
mod config;
mod run;
mod synth;

pub use bench::{format_bench_csv, synth_bench, BenchRow};
#[doc(hidden)]
pub use check::check_jacobians_scaled;
pub use check::{check_jacobians, JacobianReport};
pub use config::{ConfigError, KeyframePolicy, PrunePolicy, RunConfig, Source};
pub use run::{evaluate_keyframe, run, FrameRecord, Pipeline, RunSummary};
pub use synth::{eval_pfm, scene_spec_text, write_synthetic_dataset};

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::dataset::DatasetError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("the sequence has no frames")]
    EmptySequence,
    #[error("{0}")]
    Eval(#[from] crate::synthetic::EvalError),
    #[error("{0}")]
    Usage(String),
}

impl PipelineError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
