//! Finite-difference Maxwell operators and evaluation metrics.
//!
//! Divergence and curl are discretized with second-order central differences
//! in-plane (one-sided second-order stencils at grid edges, so the output
//! plane keeps the full extent) and a central difference across the flanking
//! z-layers. Operator outputs are T/m; the aggregation helpers convert to
//! the mT/px and µT/px units used in reports.

mod metrics;
mod operators;
mod profile;

pub use metrics::{
    evaluate_prediction, mae_mt, reconstruction_losses, MetricReport, ReconstructionLosses,
};
pub use operators::{
    curl, curl_l1_ut_per_px, divergence, divergence_mt_per_px, in_plane_curl_z,
    in_plane_divergence,
};
pub use profile::{distance_profile, nearest_given_distances, DistanceBin};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PhysicsError {
    #[error("contract error: {0}")]
    Contract(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

pub type Result<T> = std::result::Result<T, PhysicsError>;
