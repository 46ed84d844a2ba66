//! The fused property regressor: crystal graphs pass through alternating
//! node- and edge-wise transformer layers, the pooled graph state is blended
//! with a projected composition embedding, and a small transformer stack
//! refines the fused state down to one scalar.
//!
//! Everything differentiable runs on a hand-rolled reverse-mode tape over
//! dense f64 matrices, which keeps training exactly reproducible.

mod checkpoint;
mod config;
mod gradcheck;
mod network;
mod optim;
mod params;
mod tape;
mod train;

pub use checkpoint::{config_hash, Checkpoint, CheckpointMeta};
pub use config::{AblationMode, LossKind, ModelConfig, ModelError, ModelHooks, TrainConfig};
pub use gradcheck::{grad_check, GradCheckReport};
pub use network::{
    ablation_node_features, batch_loss_grads, batch_mean_loss, bind_params, forward,
    predict_value, prepare_sample, BatchGrads, PreparedSample,
};
pub use optim::{adam_step, AdamState};
pub use params::{init_params, Parameters};
pub use tape::{Tape, Tensor, Var};
pub use train::{loss_and_grad, train_loop, EpochMetrics, TrainOutcome};
