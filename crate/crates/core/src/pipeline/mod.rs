//! Config-driven orchestration: the full run, validation of an output
//! directory, the streamline benchmark, and a synthetic sample dataset.

use std::path::Path;

use thiserror::Error;

pub mod bench;
pub mod config;
pub mod manifest;
pub mod run;
pub mod sample;
pub mod validate;

pub use bench::cmd_bench;
pub use config::{PipelineConfig, LANDUSE_CLASSES};
pub use manifest::{Manifest, ManifestFile, RunStatus, MANIFEST_NAME};
pub use run::{build_masks, run_pipeline, MaskSet, RunFailure};
pub use sample::write_sample_dataset;
pub use validate::{cmd_validate, ValidationReport};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("input {path}: {message}")]
    Input { path: String, message: String },
    #[error("stage {stage}: {message}")]
    Stage { stage: String, message: String },
    #[error("validation failed: {0}")]
    Validation(String),
}

impl PipelineError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        PipelineError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    pub fn input(path: &Path, e: impl std::fmt::Display) -> Self {
        PipelineError::Input {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    pub fn stage(stage: &str, e: impl std::fmt::Display) -> Self {
        PipelineError::Stage {
            stage: stage.to_string(),
            message: e.to_string(),
        }
    }

    /// Process exit code: 1 validation, 2 config, 3 input/output and
    /// processing failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Validation(_) => 1,
            PipelineError::Config(_) => 2,
            PipelineError::Io { .. } | PipelineError::Input { .. } | PipelineError::Stage { .. } => 3,
        }
    }
}
