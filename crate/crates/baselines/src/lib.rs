//! Classical comparison methods: piecewise-linear interpolation over a
//! Delaunay triangulation, a least-squares tensor-product cubic spline,
//! biharmonic inpainting, and Gaussian-process regression with an RBF
//! kernel. All methods work per field component in double precision and
//! never modify given pixels.

mod biharmonic;
mod gp;
pub mod linalg;
mod linear;
mod spline;

pub use biharmonic::biharmonic_inpaint;
pub use gp::{gp_predict, GPConfig};
pub use linear::linear_interp;
pub use spline::spline_interp;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("unsupported task: {0}")]
    UnsupportedTask(String),
    #[error("conditioning error: {0}")]
    Conditioning(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

pub type Result<T> = std::result::Result<T, BaselineError>;

pub(crate) fn check_plane_mask(
    plane: &field_core::Plane,
    mask: &field_core::Mask,
) -> Result<()> {
    if plane.h() != mask.h() || plane.w() != mask.w() {
        return Err(BaselineError::Dimension(format!(
            "plane {}x{} vs mask {}x{}",
            plane.h(),
            plane.w(),
            mask.h(),
            mask.w()
        )));
    }
    Ok(())
}
