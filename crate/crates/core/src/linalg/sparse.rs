use faer::sparse::{SparseColMat, Triplet};

use super::LinalgError;

/// Compressed sparse row matrix with sorted, duplicate-free column indices.
///
/// Symmetric operators store their full pattern (both triangles).
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Triplet accumulator; duplicates are summed when the matrix is built.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn build(self) -> CsrMatrix {
        CsrMatrix::from_triplets(self.nrows, self.ncols, self.entries)
    }
}

impl CsrMatrix {
    /// Wraps raw CSR arrays; column indices must be sorted and unique per row.
    pub fn from_raw(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        assert_eq!(row_ptr.len(), nrows + 1);
        assert_eq!(col_idx.len(), values.len());
        assert_eq!(row_ptr[nrows], col_idx.len());
        debug_assert!(row_ptr
            .windows(2)
            .all(|w| col_idx[w[0]..w[1]].windows(2).all(|c| c[0] < c[1])));
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds from `(row, col, value)` triplets, summing duplicates.
    ///
    /// Summation order is the order of the input, so identical input gives
    /// bitwise identical matrices.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut entries: Vec<(usize, usize, f64)>,
    ) -> Self {
        // stable sort keeps the per-entry summation order deterministic
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            assert!(
                r < nrows && c < ncols,
                "triplet ({r},{c}) outside {nrows}x{ncols}"
            );
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut trip = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(nrows, ncols, trip)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterates over `(col, value)` pairs of one row.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[span.clone()].binary_search(&j) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    /// `y = Aᵀ x`
    pub fn mul_transpose_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col_idx[k]] += self.values[k] * xi;
            }
        }
        y
    }

    /// `xᵀ A y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        let mut acc = 0.0;
        for (i, &xi) in x.iter().enumerate() {
            let mut row = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                row += self.values[k] * y[self.col_idx[k]];
            }
            acc += xi * row;
        }
        acc
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut trip = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                trip.push((j, i, v));
            }
        }
        CsrMatrix::from_triplets(self.ncols, self.nrows, trip)
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    /// Linear combination `Σ coeffs[k]·mats[k]` over possibly different patterns.
    pub fn linear_combination(coeffs: &[f64], mats: &[&CsrMatrix]) -> CsrMatrix {
        assert_eq!(coeffs.len(), mats.len());
        assert!(!mats.is_empty());
        let (nrows, ncols) = (mats[0].nrows, mats[0].ncols);
        let same_pattern = mats
            .iter()
            .all(|m| m.row_ptr == mats[0].row_ptr && m.col_idx == mats[0].col_idx);
        if same_pattern {
            let mut out = mats[0].clone();
            out.values.iter_mut().for_each(|v| *v = 0.0);
            for (&c, m) in coeffs.iter().zip(mats) {
                for (o, &v) in out.values.iter_mut().zip(&m.values) {
                    *o += c * v;
                }
            }
            return out;
        }
        let mut trip = Vec::new();
        for (&c, m) in coeffs.iter().zip(mats) {
            assert_eq!((m.nrows, m.ncols), (nrows, ncols));
            for i in 0..m.nrows {
                for (j, v) in m.row(i) {
                    trip.push((i, j, c * v));
                }
            }
        }
        CsrMatrix::from_triplets(nrows, ncols, trip)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `max |A − Aᵀ|` over the stored pattern and its transpose.
    pub fn asymmetry(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let mut worst = 0.0_f64;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Rows and columns restricted to `keep` (in the given order).
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (new, &old) in cols.iter().enumerate() {
            col_map[old] = new;
        }
        let mut trip = Vec::new();
        for (new_i, &i) in rows.iter().enumerate() {
            for (j, v) in self.row(i) {
                let nj = col_map[j];
                if nj != usize::MAX {
                    trip.push((new_i, nj, v));
                }
            }
        }
        CsrMatrix::from_triplets(rows.len(), cols.len(), trip)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] += v;
            }
        }
        out
    }

    pub(crate) fn to_faer(&self) -> Result<SparseColMat<usize, f64>, LinalgError> {
        let mut trip = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                trip.push(Triplet::new(i, j, v));
            }
        }
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &trip)
            .map_err(|e| LinalgError::Backend(format!("{e:?}")))
    }

    /// Stacks blocks into one matrix; `None` blocks are zero.
    pub fn from_blocks(blocks: &[Vec<Option<&CsrMatrix>>]) -> CsrMatrix {
        let nbr = blocks.len();
        let nbc = blocks[0].len();
        let mut row_sizes = vec![None; nbr];
        let mut col_sizes = vec![None; nbc];
        for (bi, brow) in blocks.iter().enumerate() {
            assert_eq!(brow.len(), nbc);
            for (bj, b) in brow.iter().enumerate() {
                if let Some(m) = b {
                    for (slot, n) in [(&mut row_sizes[bi], m.nrows), (&mut col_sizes[bj], m.ncols)]
                    {
                        match slot {
                            Some(prev) => assert_eq!(*prev, n, "inconsistent block sizes"),
                            None => *slot = Some(n),
                        }
                    }
                }
            }
        }
        let row_sizes: Vec<usize> = row_sizes
            .into_iter()
            .map(|s| s.expect("empty block row"))
            .collect();
        let col_sizes: Vec<usize> = col_sizes
            .into_iter()
            .map(|s| s.expect("empty block column"))
            .collect();
        let offsets = |sizes: &[usize]| {
            let mut o = vec![0; sizes.len() + 1];
            for (k, s) in sizes.iter().enumerate() {
                o[k + 1] = o[k] + s;
            }
            o
        };
        let ro = offsets(&row_sizes);
        let co = offsets(&col_sizes);
        let mut trip = Vec::new();
        for (bi, brow) in blocks.iter().enumerate() {
            for (bj, b) in brow.iter().enumerate() {
                if let Some(m) = b {
                    for i in 0..m.nrows {
                        for (j, v) in m.row(i) {
                            trip.push((ro[bi] + i, co[bj] + j, v));
                        }
                    }
                }
            }
        }
        CsrMatrix::from_triplets(ro[nbr], co[nbc], trip)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha·x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(
            2,
            2,
            vec![(0, 0, 1.0), (1, 1, 2.0), (0, 0, 3.0), (0, 1, -1.0)],
        );
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 0), 4.0);
        assert_eq!(m.get(1, 0), 0.0);
        assert_eq!(m.mul_vec(&[1.0, 1.0]), vec![3.0, 2.0]);
        assert_eq!(m.mul_transpose_vec(&[1.0, 1.0]), vec![4.0, 1.0]);
    }

    #[test]
    fn blocks_and_submatrix() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 5.0]]);
        let b = CsrMatrix::from_dense(&[vec![7.0], vec![8.0]]);
        let bt = b.transpose();
        let k = CsrMatrix::from_blocks(&[vec![Some(&a), Some(&b)], vec![Some(&bt), None]]);
        assert_eq!(k.nrows(), 3);
        assert_eq!(k.get(2, 1), 8.0);
        assert_eq!(k.asymmetry(), 0.0);
        let s = k.submatrix(&[0, 2], &[0, 2]);
        assert_eq!(s.to_dense(), vec![vec![1.0, 7.0], vec![7.0, 0.0]]);
    }

    #[test]
    fn combination_of_different_patterns() {
        let a = CsrMatrix::identity(2);
        let b = CsrMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let c = CsrMatrix::linear_combination(&[2.0, -1.0], &[&a, &b]);
        assert_eq!(c.to_dense(), vec![vec![2.0, -1.0], vec![-1.0, 2.0]]);
        assert_eq!(c.bilinear(&[1.0, 1.0], &[1.0, 1.0]), 2.0);
    }
}
