//! Sparse storage, SPD solvers, saddle-point solvers and small dense solves.

mod dense;
mod saddle;
mod solvers;
mod sparse;

use thiserror::Error;

pub use dense::{dense_cholesky_factor, dense_solve, DenseMatrix};
pub use saddle::{
    control_optimality_residual, saddle_solvers, BlockSaddleMatrix, SaddleSolution, SaddleSolver,
};
pub use solvers::{spd_solvers, SpdFactor, SpdSolver};
pub use sparse::{axpy, dot, norm2, CsrMatrix, TripletBuilder};

#[derive(Debug, Clone, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite ({0})")]
    NotPositiveDefinite(String),
    #[error("singular matrix ({0})")]
    Singular(String),
    #[error(
        "{method} did not converge in {iterations} iterations (relative residual {residual:.3e})"
    )]
    NoConvergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("backend failure: {0}")]
    Backend(String),
}

/// `‖A x − b‖ / ‖b‖`, or the absolute residual when `b = 0`.
pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let mut r = a.mul_vec(x);
    axpy(-1.0, b, &mut r);
    let nb = norm2(b);
    if nb > 0.0 {
        norm2(&r) / nb
    } else {
        norm2(&r)
    }
}
