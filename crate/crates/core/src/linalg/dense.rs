use faer::linalg::solvers::Solve;
use faer::prelude::*;
use faer::Side;

use super::LinalgError;

/// Row-major dense matrix for reduced systems.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn from_fn(n_rows: usize, n_cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n_rows, n_cols);
        for i in 0..n_rows {
            for j in 0..n_cols {
                m.data[i * n_cols + j] = f(i, j);
            }
        }
        m
    }

    pub fn from_row_major(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n_rows * n_cols);
        Self {
            n_rows,
            n_cols,
            data,
        }
    }

    pub fn nrows(&self) -> usize {
        self.n_rows
    }

    pub fn ncols(&self) -> usize {
        self.n_cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n_cols + j] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n_cols + j] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        self.data
            .chunks_exact(self.n_cols.max(1))
            .take(self.n_rows)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Grows a square matrix by one row and column filled with zeros.
    pub fn grow(&mut self) {
        let (r, c) = (self.n_rows, self.n_cols);
        let mut next = Self::zeros(r + 1, c + 1);
        for i in 0..r {
            for j in 0..c {
                next.set(i, j, self.get(i, j));
            }
        }
        *self = next;
    }

    /// `self += alpha·other`
    pub fn add_scaled(&mut self, alpha: f64, other: &DenseMatrix) {
        assert_eq!((self.n_rows, self.n_cols), (other.n_rows, other.n_cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    fn to_faer(&self) -> Mat<f64> {
        Mat::from_fn(self.n_rows, self.n_cols, |i, j| self.get(i, j))
    }
}

/// Solves a square dense system by LU with partial pivoting.
pub fn dense_solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(LinalgError::Dimension(format!(
            "{}x{} matrix with rhs of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let lu = a.to_faer().partial_piv_lu();
    let x = lu.solve(Col::<f64>::from_fn(n, |i| b[i]));
    let out: Vec<f64> = (0..n).map(|i| x[i]).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::Singular(format!("dense {n}x{n} system")));
    }
    Ok(out)
}

/// Upper Cholesky factor `R` with `a = RᵀR`, row-major.
pub fn dense_cholesky_factor(a: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    let n = a.nrows();
    if n == 0 {
        return Ok(DenseMatrix::zeros(0, 0));
    }
    let llt = a
        .to_faer()
        .llt(Side::Lower)
        .map_err(|e| LinalgError::NotPositiveDefinite(format!("{e:?}")))?;
    let l = llt.L();
    Ok(DenseMatrix::from_fn(n, n, |i, j| {
        if j >= i {
            l[(j, i)]
        } else {
            0.0
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pivoting_solve() {
        let a = DenseMatrix::from_row_major(2, 2, vec![0.0, 1.0, 1.0, 0.0]);
        assert_eq!(dense_solve(&a, &[2.0, 3.0]).unwrap(), vec![3.0, 2.0]);
    }

    #[test]
    fn cholesky_reproduces_matrix() {
        let a = DenseMatrix::from_row_major(2, 2, vec![4.0, 2.0, 2.0, 5.0]);
        let r = dense_cholesky_factor(&a).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let v: f64 = (0..2).map(|k| r.get(k, i) * r.get(k, j)).sum();
                assert!((v - a.get(i, j)).abs() < 1e-14);
            }
        }
    }
}
