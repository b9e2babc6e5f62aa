//! Minimal reverse-mode automatic differentiation for the fixed set of
//! operations the field-prediction networks need: convolutions (plain,
//! strided, dilated), resampling, ELU activations, contextual attention,
//! reductions and the matrix/masking plumbing around them.
//!
//! The backward pass appends ordinary graph nodes, and every vjp rule is
//! written in terms of the same op set, so gradients can be differentiated
//! again. That is what makes the exact double-backward gradient penalty
//! representable without a second machinery.
//!
//! This is not a general autodiff framework: shapes are dense row-major
//! tensors, evaluation is eager and single-threaded, and only the ops the
//! architecture needs exist.

mod attention;
mod gradcheck;
mod graph;
mod kernels;
mod scalar;
mod tensor;

pub use attention::{contextual_attention, AttentionSpec};
pub use gradcheck::{grad_check, max_rel_error};
pub use graph::{Graph, NodeId};
pub use kernels::ConvSpec;
pub use scalar::Scalar;
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("attention error: {0}")]
    Attention(String),
    #[error("numerical error: non-finite {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, NnError>;
