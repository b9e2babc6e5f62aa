//! Physics-informed WGAN-GP for masked field prediction: coarse/fine
//! generators with contextual attention, global and local critics, the
//! gradient penalty in exact and surrogate form, reconstruction and
//! Maxwell-residual losses, the training loop, checkpoints and inference.

mod adam;
mod checkpoint;
mod config;
mod loss;
mod model;
mod params;
mod predict;
mod train;

pub use adam::AdamState;
pub use checkpoint::{Checkpoint, NamedBlobs, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{GpMode, Precision, TrainConfig};
pub use loss::{
    batch_mean, critic_loss, d_dx, d_dy, gradient_penalty, physics_losses, FlankingDerivatives,
};
pub use model::{
    compose_on_graph, concat_mask_channel, critic_global, critic_local, critic_scores, generate,
    generator_coarse, generator_fine, mask_quarter_res, BatchInput,
};
pub use params::{
    init_critic, init_generator, CriticParams, GeneratorLayout, GeneratorParams, ParamBuilder,
    ParamSet,
};
pub use predict::predict;
pub use train::{train, TraceRow, TrainOutcome};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GanError {
    #[error("config error: {0}")]
    Config(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("numerical failure: {0}")]
    NonFinite(String),
    #[error(transparent)]
    Nn(#[from] nn::NnError),
    #[error("field error: {0}")]
    Field(field_core::FieldError),
    #[error("task error: {0}")]
    Task(#[from] tasks::TaskError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GanError>;
