use super::MeshError;

/// Tensor-product grid of `(0,T) × (a,b)` with a polynomial degree per direction.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorGrid {
    breakpoints_t: Vec<f64>,
    breakpoints_x: Vec<f64>,
    degree: usize,
}

impl TensorGrid {
    pub fn new(
        breakpoints_t: Vec<f64>,
        breakpoints_x: Vec<f64>,
        degree: usize,
    ) -> Result<Self, MeshError> {
        for (name, b) in [("t", &breakpoints_t), ("x", &breakpoints_x)] {
            if b.len() < 2 || b.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(MeshError::Unsupported(format!(
                    "{name} breakpoints must be strictly increasing with at least two entries"
                )));
            }
        }
        if degree == 0 {
            return Err(MeshError::Unsupported(
                "tensor degree must be at least 1".into(),
            ));
        }
        Ok(Self {
            breakpoints_t,
            breakpoints_x,
            degree,
        })
    }

    /// `nt × nx` equal subintervals of `(0, end_time) × (x0, x1)`.
    pub fn uniform(
        end_time: f64,
        x_range: (f64, f64),
        nt: usize,
        nx: usize,
        degree: usize,
    ) -> Result<Self, MeshError> {
        let lin = |a: f64, b: f64, n: usize| -> Vec<f64> {
            (0..=n)
                .map(|k| {
                    if k == n {
                        b
                    } else {
                        a + (b - a) * k as f64 / n as f64
                    }
                })
                .collect()
        };
        Self::new(
            lin(0.0, end_time, nt),
            lin(x_range.0, x_range.1, nx),
            degree,
        )
    }

    pub fn breakpoints_t(&self) -> &[f64] {
        &self.breakpoints_t
    }

    pub fn breakpoints_x(&self) -> &[f64] {
        &self.breakpoints_x
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn nt(&self) -> usize {
        self.breakpoints_t.len() - 1
    }

    pub fn nx(&self) -> usize {
        self.breakpoints_x.len() - 1
    }

    pub fn end_time(&self) -> f64 {
        *self.breakpoints_t.last().unwrap()
    }

    pub fn n_cells(&self) -> usize {
        self.nt() * self.nx()
    }

    /// Cell index of time interval `i` and space interval `j`.
    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        i * self.nx() + j
    }

    pub fn cell_bounds(&self, c: usize) -> ((f64, f64), (f64, f64)) {
        let (i, j) = (c / self.nx(), c % self.nx());
        (
            (self.breakpoints_t[i], self.breakpoints_t[i + 1]),
            (self.breakpoints_x[j], self.breakpoints_x[j + 1]),
        )
    }

    /// Interval index containing `v` among `breaks`, or `None` outside.
    pub(crate) fn interval(breaks: &[f64], v: f64) -> Option<usize> {
        let (a, b) = (breaks[0], *breaks.last().unwrap());
        if v < a - 1e-12 || v > b + 1e-12 {
            return None;
        }
        let k = breaks.partition_point(|&x| x <= v);
        Some(k.saturating_sub(1).min(breaks.len() - 2))
    }

    pub fn locate(&self, p: &[f64]) -> Option<usize> {
        let i = Self::interval(&self.breakpoints_t, p[0])?;
        let j = Self::interval(&self.breakpoints_x, p[1])?;
        Some(self.cell_index(i, j))
    }
}
