//! Dataset handling, splits, metrics, task presets, and the staged
//! orchestration (kg-build, kg-embed, featurize, train, evaluate, predict)
//! behind the command line. Every run writes a manifest with content hashes
//! so identical configs can be checked byte for byte.

mod config;
mod dataset;
mod metrics;
mod presets;
mod run;
mod split;

pub use config::RunConfig;
pub use dataset::{load_dataset, parse_dataset, DatasetRecord};
pub use metrics::{mae, write_metrics};
pub use presets::{apply_preset, task_preset, TaskPreset};
pub use run::{
    run_pipeline, stage_evaluate, stage_featurize, stage_kg_build, stage_kg_embed,
    stage_predict, stage_train, Evaluation, Manifest,
};
pub use split::{split_dataset, SplitSpec};

use crate::crystal::CrystalError;
use crate::elementkg::ElementKgError;
use crate::kgembed::EmbedError;
use crate::model::ModelError;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("split wants {requested} records but the dataset has {available}")]
    SizeExceeded { requested: usize, available: usize },
    #[error("prediction and target counts differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("cannot compute a mean over zero values")]
    EmptyInput,
    #[error("record {id} has no {target:?} target")]
    MissingTarget { id: String, target: String },
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<PipelineError>,
    },
    #[error(transparent)]
    Element(#[from] ElementKgError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Crystal(#[from] CrystalError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl PipelineError {
    /// Process exit code: 1 for usage and configuration mistakes, 2 for
    /// data problems, 3 when a numeric failure (NaN) was detected.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Stage { source, .. } => source.exit_code(),
            PipelineError::BadConfig(_) => 1,
            PipelineError::Model(ModelError::BadConfig(_)) => 1,
            PipelineError::Model(ModelError::NonFinite { .. }) => 3,
            _ => 2,
        }
    }

    /// Wraps an error with the stage that raised it.
    pub fn in_stage(stage: &'static str, source: impl Into<PipelineError>) -> Self {
        PipelineError::Stage {
            stage,
            source: Box::new(source.into()),
        }
    }
}
