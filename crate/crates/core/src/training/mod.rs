//! Quantile loss, ADAM, the minibatch training loop with early stopping,
//! and checkpoint persistence.

mod checkpoint;
mod fit;
mod loss;
mod optimizer;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, TrainingMetadata, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub(crate) use checkpoint::write_atomic;
pub use fit::{evaluate_loss, fit, EpochRecord, StopReason, TrainConfig, TrainReport};
pub use loss::{pinball_loss, total_quantile_loss};
pub use optimizer::{adam_step, clip_global_norm, AdamConfig, OptimizerState};
