//! Stage orchestration for the command-line tool: fetch, features, fit and report, each
//! reading and writing plain files under the configured output directory.

mod collect;
mod config;
mod report;
mod stages;

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analysis::AnalysisError;
use crate::features::FeatureError;
use crate::ingest::IngestError;

pub use collect::{cmd_fetch, FetchFailure, FetchSummary, MissingPage};
pub use config::{parse_weeks, ConfigOverrides, PipelineConfig};
pub use report::{cmd_report, ReportSummary};
pub use stages::{cmd_features, cmd_fit, FeatureSummary, FitIndexEntry};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Ingest(#[from] IngestError),

    #[error(transparent)]
    Feature(#[from] FeatureError),

    #[error(transparent)]
    Analysis(#[from] AnalysisError),

    #[error("{failed} fetch failure(s); see fetch_summary.json")]
    FetchIncomplete { failed: usize, network: bool },

    #[error("feature tables violate {} invariant(s); see validation.json. First: {}", .0.len(), .0.first().map_or("", String::as_str))]
    Invariant(Vec<String>),

    #[error("model(s) failed: {}", .0.join(", "))]
    ModelFailures(Vec<String>),

    #[error("no fit for {0}; run the fit stage first")]
    MissingFit(String),

    #[error("missing {}; run the {stage} stage first", path.display())]
    MissingInput { path: PathBuf, stage: &'static str },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    /// 0 success, 1 validation or model error, 2 configuration error, 3 network error.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Ingest(e) if e.is_network() => 3,
            PipelineError::Ingest(IngestError::Io { .. }) => 2,
            PipelineError::Analysis(AnalysisError::UnknownModel(_)) => 2,
            PipelineError::FetchIncomplete { network: true, .. } => 3,
            _ => 1,
        }
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

pub(crate) fn create_dir(path: &Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(path).map_err(io_err(path))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    std::fs::write(path, text).map_err(io_err(path))
}

pub(crate) fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).expect("pipeline documents serialize");
    text.push('\n');
    write_text(path, &text)
}

pub(crate) fn require(path: PathBuf, stage: &'static str) -> Result<PathBuf, PipelineError> {
    if path.exists() {
        Ok(path)
    } else {
        Err(PipelineError::MissingInput { path, stage })
    }
}

/// Runs every stage in order.
pub fn run_all(cfg: &PipelineConfig) -> Result<(), PipelineError> {
    cmd_fetch(cfg)?;
    cmd_features(cfg)?;
    cmd_fit(cfg)?;
    cmd_report(cfg)?;
    Ok(())
}
