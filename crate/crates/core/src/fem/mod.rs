//! Finite-element spaces, quadrature, and kernel-based assembly on space-time
//! discretizations.

mod assembly;
mod basis;
mod fields;
mod quadrature;
mod space;

use thiserror::Error;

pub use assembly::{
    assemble_matrix, assemble_vector, check_same_cells, integrate, integrate_fe, integrate_fe_multi,
    kernel, sample_fe, FormKernel, KernelFn,
};
pub use basis::{CellGeometry, FacetPoints, P0Basis, P1Basis, Q3Basis, ScalarBasis};
pub use fields::ScalarField;
pub use quadrature::{gauss_legendre, QuadratureRule};
pub use space::{build_space, Discretization, FeSpace, FeValue, Region};

/// Quadrature degree for stiffness and load terms on simplices.
pub const ASSEMBLY_DEGREE: usize = 4;
/// Quadrature degree for error norms against closed forms.
pub const ERROR_DEGREE: usize = 8;
/// Quadrature degree whose tensor rule has six Gauss points per direction.
pub const TENSOR_ERROR_DEGREE: usize = 10;

#[derive(Debug, Clone, Error)]
pub enum FemError {
    #[error("unsupported space: {0}")]
    Unsupported(String),
    #[error("point {0:?} lies outside the discretized domain")]
    PointNotFound(Vec<f64>),
    #[error("incompatible spaces: {0}")]
    Mismatch(String),
}
