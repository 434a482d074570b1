use std::sync::Arc;

use super::basis::{P0Basis, P1Basis, Q3Basis, ScalarBasis};
use super::fields::ScalarField;
use super::FemError;
use crate::mesh::{BoundaryTag, SpaceTimeMesh, TensorGrid};

/// Integration domain: all cells, or the boundary facets with one tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Cells,
    Facets(BoundaryTag),
}

/// The discretization a space is built on.
#[derive(Debug, Clone)]
pub enum Discretization {
    Simplicial(Arc<SpaceTimeMesh>),
    Tensor(Arc<TensorGrid>),
}

/// Product of `components` copies of one scalar basis. Global dof
/// `k·n_scalar + s` is scalar dof `s` of component `k`.
#[derive(Debug, Clone)]
pub struct FeSpace {
    basis: Arc<dyn ScalarBasis>,
    components: usize,
    dirichlet: Vec<bool>,
    free: Vec<usize>,
    position: Vec<usize>,
}

/// Values and space-time gradients of all components of an FE function at a point.
#[derive(Debug, Clone)]
pub struct FeValue {
    pub values: Vec<f64>,
    /// Stride `d+1` per component.
    pub grads: Vec<f64>,
    n: usize,
}

impl FeValue {
    pub(crate) fn zeros(components: usize, n: usize) -> Self {
        Self {
            values: vec![0.0; components],
            grads: vec![0.0; components * n],
            n,
        }
    }

    pub(crate) fn clear(&mut self) {
        self.values.fill(0.0);
        self.grads.fill(0.0);
    }

    #[inline]
    pub fn value(&self, comp: usize) -> f64 {
        self.values[comp]
    }

    /// `(∂ₜ, ∂ₓ₁, …)` of component `comp`.
    #[inline]
    pub fn grad(&self, comp: usize) -> &[f64] {
        &self.grads[comp * self.n..(comp + 1) * self.n]
    }

    /// Space-time divergence `∂ₜu₁ + Σₖ ∂ₓₖ u₂ₖ` for a `(d+1)`-component value.
    pub fn divergence(&self) -> f64 {
        (0..self.n).map(|k| self.grad(k)[k]).sum()
    }
}

/// Builds a space per the supported `(discretization, degree)` pairs:
/// degrees 0 and 1 on simplicial meshes, degree 3 on tensor grids.
pub fn build_space(
    disc: &Discretization,
    components: usize,
    degree: usize,
    constrain_first_on_lateral: bool,
) -> Result<FeSpace, FemError> {
    let basis: Arc<dyn ScalarBasis> = match (disc, degree) {
        (Discretization::Simplicial(m), 1) => Arc::new(P1Basis::new(m.clone())),
        (Discretization::Simplicial(m), 0) => Arc::new(P0Basis::new(m.clone())),
        (Discretization::Tensor(g), 3) if g.degree() == 3 => Arc::new(Q3Basis::new(g.clone())),
        _ => {
            return Err(FemError::Unsupported(format!(
                "degree {degree} on {}",
                match disc {
                    Discretization::Simplicial(_) => "a simplicial mesh",
                    Discretization::Tensor(_) => "a tensor grid",
                }
            )))
        }
    };
    FeSpace::new(basis, components, constrain_first_on_lateral)
}

impl FeSpace {
    pub fn new(
        basis: Arc<dyn ScalarBasis>,
        components: usize,
        constrain_first_on_lateral: bool,
    ) -> Result<Self, FemError> {
        if components == 0 {
            return Err(FemError::Unsupported("space without components".into()));
        }
        if constrain_first_on_lateral && basis.degree() == 0 {
            return Err(FemError::Unsupported(
                "Dirichlet constraints on a discontinuous space".into(),
            ));
        }
        let ns = basis.n_dofs();
        let mut dirichlet = vec![false; ns * components];
        if constrain_first_on_lateral {
            for (s, d) in dirichlet.iter_mut().enumerate().take(ns) {
                *d = basis.on_lateral(s);
            }
        }
        let mut position = vec![usize::MAX; dirichlet.len()];
        let mut free = Vec::with_capacity(dirichlet.len());
        for (g, &fixed) in dirichlet.iter().enumerate() {
            if !fixed {
                position[g] = free.len();
                free.push(g);
            }
        }
        Ok(Self {
            basis,
            components,
            dirichlet,
            free,
            position,
        })
    }

    /// `(d+1)`-component continuous P1 space with the first component vanishing on Σ.
    pub fn p1_system(mesh: Arc<SpaceTimeMesh>) -> Self {
        let c = mesh.dim() + 1;
        Self::new(Arc::new(P1Basis::new(mesh)), c, true).expect("valid P1 space")
    }

    pub fn p0(mesh: Arc<SpaceTimeMesh>) -> Self {
        Self::new(Arc::new(P0Basis::new(mesh)), 1, false).expect("valid P0 space")
    }

    /// Two-component bicubic space with the first component vanishing on Σ.
    pub fn q3_system(grid: Arc<TensorGrid>) -> Self {
        Self::new(Arc::new(Q3Basis::new(grid)), 2, true).expect("valid Q3 space")
    }

    pub fn basis(&self) -> &Arc<dyn ScalarBasis> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn n_scalar(&self) -> usize {
        self.basis.n_dofs()
    }

    pub fn n_dofs(&self) -> usize {
        self.dirichlet.len()
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn dirichlet_mask(&self) -> &[bool] {
        &self.dirichlet
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    pub fn free_index(&self, global: usize) -> Option<usize> {
        let p = self.position[global];
        (p != usize::MAX).then_some(p)
    }

    #[inline]
    pub fn global(&self, comp: usize, scalar: usize) -> usize {
        comp * self.basis.n_dofs() + scalar
    }

    /// Free coefficients to a full vector with zeros on constrained dofs.
    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        assert_eq!(free.len(), self.n_free());
        let mut full = vec![0.0; self.n_dofs()];
        for (k, &g) in self.free.iter().enumerate() {
            full[g] = free[k];
        }
        full
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        assert_eq!(full.len(), self.n_dofs());
        self.free.iter().map(|&g| full[g]).collect()
    }

    /// Nodal interpolant of one closed-form field per component (full vector).
    pub fn interpolate(&self, fields: &[ScalarField]) -> Vec<f64> {
        assert_eq!(fields.len(), self.components);
        let ns = self.n_scalar();
        let mut out = vec![0.0; self.n_dofs()];
        for s in 0..ns {
            let p = self.basis.node(s);
            for (k, f) in fields.iter().enumerate() {
                out[k * ns + s] = f.eval(&p);
            }
        }
        out
    }

    /// Evaluates a full coefficient vector at `points` (stride `d+1`).
    pub fn evaluate(&self, coeffs: &[f64], points: &[Vec<f64>]) -> Result<Vec<FeValue>, FemError> {
        let n = self.dim() + 1;
        let nl = self.basis.n_local();
        let mut vals = vec![0.0; nl];
        let mut grads = vec![0.0; nl * n];
        points
            .iter()
            .map(|p| {
                let c = self
                    .basis
                    .locate(p)
                    .ok_or_else(|| FemError::PointNotFound(p.clone()))?;
                let geom = self.basis.geometry(c);
                let xi = geom.to_reference(p);
                self.basis.eval(&geom, &xi, &mut vals, &mut grads);
                let mut out = FeValue::zeros(self.components, n);
                self.accumulate(coeffs, c, &vals, &grads, &mut out);
                Ok(out)
            })
            .collect()
    }

    /// Adds the cell-`c` contribution of `coeffs` given local basis values.
    pub(crate) fn accumulate(&self, coeffs: &[f64], c: usize, vals: &[f64], grads: &[f64], out: &mut FeValue) {
        let n = out.n;
        let ns = self.n_scalar();
        let dofs = self.basis.cell_dofs(c);
        for k in 0..self.components {
            for (i, &s) in dofs.iter().enumerate() {
                let a = coeffs[k * ns + s];
                if a == 0.0 {
                    continue;
                }
                out.values[k] += a * vals[i];
                for r in 0..n {
                    out.grads[k * n + r] += a * grads[i * n + r];
                }
            }
        }
    }

    /// Whether two spaces live on the same cells.
    pub fn same_cells(&self, other: &FeSpace) -> bool {
        self.basis.n_cells() == other.basis.n_cells()
            && self.dim() == other.dim()
            && (0..self.basis.n_cells().min(4)).all(|c| {
                let (a, b) = (self.basis.geometry(c), other.basis.geometry(c));
                (a.abs_det() - b.abs_det()).abs() <= 1e-14 * a.abs_det().max(1e-300)
            })
    }
}
