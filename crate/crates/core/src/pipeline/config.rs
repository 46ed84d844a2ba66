use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::presets::{apply_preset, task_preset};
use super::split::SplitSpec;
use super::PipelineError;
use crate::crystal::GraphConfig;
use crate::kgembed::{SkipGramConfig, WalkConfig};
use crate::model::{ModelConfig, TrainConfig};
use crate::rng::{derive_seed, name_tag};

/// Everything a run needs, as one JSON document. Unset fields take their
/// defaults; `finalize` applies the task preset and fans the master seed
/// out to every stage.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Element attribute TSV; the bundled table when absent.
    pub element_table: Option<PathBuf>,
    /// Pretrained element embeddings; defaults to the kg-embed output
    /// inside `out_dir`.
    pub embedding_table: Option<PathBuf>,
    /// Newline-delimited JSON structure records.
    pub dataset: PathBuf,
    pub out_dir: PathBuf,
    /// Equal-width bins for continuous element attributes.
    pub kg_bins: usize,
    pub walk: WalkConfig,
    pub embed: SkipGramConfig,
    pub graph: GraphConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub split: SplitSpec,
    /// Optional preset name; overrides fusion depth, learning rate, loss,
    /// target, and unit when set.
    pub task: Option<String>,
    /// Dataset key holding the regression target.
    pub target: String,
    /// Unit string echoed into metrics and evaluation output.
    pub unit: String,
    /// Master seed. `finalize` derives per-stage seeds from it, replacing
    /// any seed given on a nested config.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            element_table: None,
            embedding_table: None,
            dataset: PathBuf::from("dataset.jsonl"),
            out_dir: PathBuf::from("out"),
            kg_bins: 10,
            walk: WalkConfig::default(),
            embed: SkipGramConfig::default(),
            graph: GraphConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            split: SplitSpec::default(),
            task: None,
            target: "band_gap".into(),
            unit: "eV".into(),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::BadConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            PipelineError::BadConfig(format!("config {}: {e}", path.display()))
        })?;
        Self::from_json(&text)
    }

    /// Applies the task preset, validates, and derives stage seeds from the
    /// master seed. Must run once before the config is used.
    pub fn finalize(&mut self) -> Result<(), PipelineError> {
        if let Some(name) = &self.task {
            let preset = task_preset(name).ok_or_else(|| {
                PipelineError::BadConfig(format!("unknown task preset {name:?}"))
            })?;
            apply_preset(preset, &mut self.model, &mut self.train);
            self.target = preset.target.to_string();
            self.unit = preset.unit.to_string();
        }
        if self.kg_bins == 0 {
            return Err(PipelineError::BadConfig("kg_bins must be positive".into()));
        }
        self.model
            .validate()
            .map_err(|e| PipelineError::BadConfig(e.to_string()))?;
        self.train
            .validate()
            .map_err(|e| PipelineError::BadConfig(e.to_string()))?;

        self.walk.seed = derive_seed(self.seed, &[name_tag("walks")]);
        self.embed.seed = derive_seed(self.seed, &[name_tag("skipgram")]);
        self.model.seed = derive_seed(self.seed, &[name_tag("model")]);
        self.train.seed = derive_seed(self.seed, &[name_tag("train")]);
        self.split.seed = derive_seed(self.seed, &[name_tag("split")]);
        Ok(())
    }

    pub fn out_path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    pub fn embeddings_path(&self) -> PathBuf {
        self.embedding_table
            .clone()
            .unwrap_or_else(|| self.out_path("embeddings.txt"))
    }
}
