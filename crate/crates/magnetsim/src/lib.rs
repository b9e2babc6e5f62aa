//! Analytical magnetostatic synthesis of the virtual dataset: random
//! prism-magnet assemblies and the field they produce on a small central
//! area sampled on three z-layers.
//!
//! The single-prism field uses the closed-form demagnetization-tensor
//! expression for a uniformly magnetized rectangular prism; assemblies are
//! plain superpositions (hard magnets, no interaction).

mod assembly;
mod prism;
mod render;

pub use assembly::{sample_assembly, AssemblyConfig, EasyAxisDistribution, MagnetAssembly};
pub use prism::{demag_tensor, prism_field, PrismMagnet};
pub use render::{dataset_digest, generate_dataset, generate_sample, render_sample, sample_seed};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("generation error: {0}")]
    Generation(String),
    #[error("field error: {0}")]
    Field(#[from] field_core::FieldError),
}

pub type Result<T> = std::result::Result<T, SimError>;
