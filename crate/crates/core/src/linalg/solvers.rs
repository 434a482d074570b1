use faer::linalg::solvers::Solve;
use faer::prelude::*;
use faer::sparse::linalg::solvers::Llt;
use faer::Side;

use super::sparse::{axpy, dot, norm2, CsrMatrix};
use super::LinalgError;
use crate::registry::Registry;

/// A factorized (or otherwise prepared) SPD operator that can be solved repeatedly.
pub trait SpdFactor: Send + Sync {
    fn dim(&self) -> usize;
    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, LinalgError>;
}

/// Strategy for symmetric positive definite systems.
pub trait SpdSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn factor(&self, m: &CsrMatrix) -> Result<Box<dyn SpdFactor>, LinalgError>;

    fn solve(&self, m: &CsrMatrix, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        self.factor(m)?.solve(rhs)
    }
}

/// Registered SPD strategies: `cholesky` (sparse direct, default) and `cg`.
pub fn spd_solvers() -> Registry<dyn SpdSolver> {
    Registry::new("spd solver")
        .with(
            "cholesky",
            "sparse supernodal Cholesky factorization",
            || Box::new(SparseCholesky) as Box<dyn SpdSolver>,
        )
        .with("cg", "Jacobi-preconditioned conjugate gradients", || {
            Box::new(ConjugateGradient::default()) as Box<dyn SpdSolver>
        })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SparseCholesky;

struct CholeskyFactor {
    n: usize,
    llt: Llt<usize, f64>,
}

impl SpdFactor for CholeskyFactor {
    fn dim(&self) -> usize {
        self.n
    }

    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if rhs.len() != self.n {
            return Err(LinalgError::Dimension(format!(
                "rhs has length {}, factor has dimension {}",
                rhs.len(),
                self.n
            )));
        }
        let mut x = Col::<f64>::from_fn(self.n, |i| rhs[i]);
        self.llt.solve_in_place(x.as_mut());
        Ok((0..self.n).map(|i| x[i]).collect())
    }
}

impl SpdSolver for SparseCholesky {
    fn name(&self) -> &'static str {
        "cholesky"
    }

    fn factor(&self, m: &CsrMatrix) -> Result<Box<dyn SpdFactor>, LinalgError> {
        if m.nrows() != m.ncols() {
            return Err(LinalgError::Dimension(format!(
                "{}x{} is not square",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.nrows();
        if n == 0 {
            return Ok(Box::new(EmptyFactor));
        }
        let a = m.to_faer()?;
        let llt = a.sp_cholesky(Side::Lower).map_err(|e| {
            let diag = m.diagonal();
            let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = diag.iter().cloned().fold(0.0, f64::max);
            LinalgError::NotPositiveDefinite(format!(
                "{e:?}; diagonal range [{min:.3e}, {max:.3e}], ratio estimate {:.3e}",
                max / min.abs().max(f64::MIN_POSITIVE)
            ))
        })?;
        Ok(Box::new(CholeskyFactor { n, llt }))
    }
}

struct EmptyFactor;

impl SpdFactor for EmptyFactor {
    fn dim(&self) -> usize {
        0
    }
    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if !rhs.is_empty() {
            return Err(LinalgError::Dimension(
                "nonempty rhs for empty system".into(),
            ));
        }
        Ok(Vec::new())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConjugateGradient {
    pub rel_tol: f64,
    pub max_iter: Option<usize>,
}

impl Default for ConjugateGradient {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            max_iter: None,
        }
    }
}

struct CgOperator {
    matrix: CsrMatrix,
    inv_diag: Vec<f64>,
    cfg: ConjugateGradient,
}

impl SpdFactor for CgOperator {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let n = self.dim();
        let max_iter = self.cfg.max_iter.unwrap_or(10 * n.max(10));
        pcg(
            |x, y| self.matrix.mul_vec_into(x, y),
            |r, z| {
                for ((zi, ri), di) in z.iter_mut().zip(r).zip(&self.inv_diag) {
                    *zi = ri * di;
                }
            },
            rhs,
            self.cfg.rel_tol,
            max_iter,
        )
        .map(|(x, _)| x)
    }
}

impl SpdSolver for ConjugateGradient {
    fn name(&self) -> &'static str {
        "cg"
    }

    fn factor(&self, m: &CsrMatrix) -> Result<Box<dyn SpdFactor>, LinalgError> {
        let diag = m.diagonal();
        if let Some((i, d)) = diag.iter().enumerate().find(|(_, d)| **d <= 0.0) {
            return Err(LinalgError::NotPositiveDefinite(format!(
                "diagonal entry {i} is {d:.3e}"
            )));
        }
        Ok(Box::new(CgOperator {
            matrix: m.clone(),
            inv_diag: diag.iter().map(|d| 1.0 / d).collect(),
            cfg: *self,
        }))
    }
}

/// Preconditioned conjugate gradients for an SPD operator given as closures.
///
/// Returns the iterate and the iteration count.
pub(crate) fn pcg<A, P>(
    apply: A,
    precond: P,
    rhs: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize), LinalgError>
where
    A: Fn(&[f64], &mut [f64]),
    P: Fn(&[f64], &mut [f64]),
{
    let n = rhs.len();
    let mut x = vec![0.0; n];
    let nb = norm2(rhs);
    if nb == 0.0 {
        return Ok((x, 0));
    }
    let mut r = rhs.to_vec();
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for it in 0..max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(LinalgError::NotPositiveDefinite(format!(
                "cg curvature {pap:.3e} at iteration {it}"
            )));
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let res = norm2(&r) / nb;
        if res <= rel_tol {
            return Ok((x, it + 1));
        }
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Err(LinalgError::NoConvergence {
        method: "cg",
        iterations: max_iter,
        residual: norm2(&r) / nb,
    })
}
