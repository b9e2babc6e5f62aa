//! Core value types for magnetic field grids, masks and samples, plus the
//! dataset container format shared by every other crate in the workspace.
//!
//! All field values are stored in tesla. A [`FieldGrid`] always carries three
//! z-layers (below / measurement plane / above) of all three components, so
//! that finite-difference z-derivatives are available downstream. Reported
//! errors use millitesla; the conversion lives with the metric code, not here.

mod dataset;
mod digest;
mod grid;
pub mod par;

pub use dataset::{DatasetHeader, DatasetReader, DatasetWriter, FORMAT_VERSION, MAGIC};
pub use digest::config_digest;
pub use grid::{hadamard, FieldGrid, KeepSide, Mask, Plane, Sample, SampleSource, CENTER_LAYER};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic bytes in dataset header")]
    BadMagic,
    #[error("unsupported dataset format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("truncated dataset file: {0}")]
    Truncated(String),
    #[error("config digest mismatch: dataset was generated from a different config")]
    DigestMismatch,
    #[error("ingestion error: {0}")]
    Ingest(String),
}

pub type Result<T> = std::result::Result<T, FieldError>;
