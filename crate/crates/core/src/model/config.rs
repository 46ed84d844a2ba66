use serde::{Deserialize, Serialize};

use crate::kgembed::EmbedError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    L1,
    Mse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    /// Composition embedding fused with the pooled graph state.
    Full,
    /// Element embeddings concatenated onto the 70-dim node vectors instead;
    /// the fusion path contributes nothing (alpha is treated as 0).
    AttrsAsNodeFeatures,
}

/// Test hooks. Both default to off; they exist so invariance and gradient
/// tests can freeze parts of the network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ModelHooks {
    /// Replace every attention gate with this constant. 0.0 turns each
    /// message-passing layer into an exact identity.
    pub gate_override: Option<f64>,
    /// Swap layer norm and SiLU for identity, making the forward map affine
    /// in each individual parameter coordinate.
    pub linear_paths: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct ModelConfig {
    /// Width of node, edge, and fused states (the encoder dimension d2).
    pub hidden_dim: usize,
    /// Width of element embeddings coming from the knowledge graph (d1).
    pub kg_embed_dim: usize,
    pub num_node_layers: usize,
    pub num_edge_layers: usize,
    pub num_fusion_layers: usize,
    pub num_heads: usize,
    /// Weight on the projected composition embedding.
    pub alpha: f64,
    /// Weight on the pooled graph state.
    pub beta: f64,
    pub ablation_mode: AblationMode,
    pub seed: u64,
    pub hooks: ModelHooks,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 64,
            kg_embed_dim: 64,
            num_node_layers: 3,
            num_edge_layers: 1,
            num_fusion_layers: 4,
            num_heads: 4,
            alpha: 1.0,
            beta: 1.0,
            ablation_mode: AblationMode::Full,
            seed: 0,
            hooks: ModelHooks::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.hidden_dim == 0 || self.kg_embed_dim == 0 {
            return Err(ModelError::BadConfig("dimensions must be positive".into()));
        }
        if self.num_node_layers == 0 {
            return Err(ModelError::BadConfig(
                "need at least one node-wise layer".into(),
            ));
        }
        if self.num_fusion_layers == 0 {
            return Err(ModelError::BadConfig(
                "need at least one fusion layer".into(),
            ));
        }
        if self.num_heads == 0 || self.hidden_dim % self.num_heads != 0 {
            return Err(ModelError::BadConfig(format!(
                "heads ({}) must divide hidden_dim ({})",
                self.num_heads, self.hidden_dim
            )));
        }
        if !(self.alpha.is_finite() && self.beta.is_finite()) {
            return Err(ModelError::BadConfig(
                "alpha and beta must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.num_heads
    }

    pub fn ablation(&self) -> bool {
        self.ablation_mode == AblationMode::AttrsAsNodeFeatures
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct TrainConfig {
    pub loss_kind: LossKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss_kind: LossKind::L1,
            learning_rate: 5e-4,
            epochs: 50,
            batch_size: 8,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::BadConfig(
                "learning_rate must be positive".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(ModelError::BadConfig("batch_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(ModelError::BadConfig(
                "adam betas must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad model configuration: {0}")]
    BadConfig(String),
    #[error("{what}: expected dimension {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("sample {id} is missing target {target:?}")]
    MissingTarget { id: String, target: String },
    #[error("an element embedding table is required")]
    MissingEmbeddings,
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("non-finite value in {context}")]
    NonFinite { context: String },
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}
