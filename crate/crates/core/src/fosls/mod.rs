//! Least-squares formulation of `∂ₜu − divₓ(A∇ₓu) + b·∇ₓu + cu = f₁ + divₓf₂`,
//! `u|_Σ = 0`, `u(0) = u₀` as the first-order system `G u = f` with
//!
//! `G u = (∂ₜu₁ + divₓu₂ + b·∇ₓu₁ + c u₁, −u₂ − A∇ₓu₁, u₁(0,·))`.

use thiserror::Error;

use crate::fem::{
    assemble_matrix, assemble_vector, integrate_fe, FeSpace, FeValue, FemError, FormKernel, Region, ScalarField,
    ASSEMBLY_DEGREE, ERROR_DEGREE, TENSOR_ERROR_DEGREE,
};
use crate::linalg::{relative_residual, CsrMatrix, LinalgError, SpdSolver};
use crate::mesh::{BoundaryTag, MeshError};

#[derive(Debug, Error)]
pub enum FoslsError {
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("invalid coefficient: {0}")]
    InvalidCoefficient(String),
    #[error("solver residual {residual:.3e} exceeds {tol:.0e}")]
    Inaccurate { residual: f64, tol: f64 },
}

/// Coefficients and data of a parabolic problem on a `d`-dimensional domain.
#[derive(Debug, Clone)]
pub struct FoslsProblem {
    dim: usize,
    /// `A`, row-major `d×d`.
    pub diffusion: Vec<ScalarField>,
    pub convection: Vec<ScalarField>,
    pub reaction: ScalarField,
    pub f1: ScalarField,
    pub f2: Vec<ScalarField>,
    pub u0: ScalarField,
}

impl FoslsProblem {
    /// Heat equation `A = I, b = 0, c = 0` with zero data.
    pub fn heat(dim: usize) -> Self {
        let diffusion = (0..dim * dim)
            .map(|k| ScalarField::constant(if k % (dim + 1) == 0 { 1.0 } else { 0.0 }))
            .collect();
        Self {
            dim,
            diffusion,
            convection: vec![ScalarField::zero(); dim],
            reaction: ScalarField::zero(),
            f1: ScalarField::zero(),
            f2: vec![ScalarField::zero(); dim],
            u0: ScalarField::zero(),
        }
    }

    /// Constant coefficients `A = a·I`, `b`, `c`.
    pub fn constant(dim: usize, a: f64, b: &[f64], c: f64) -> Self {
        let mut p = Self::heat(dim);
        p.diffusion = (0..dim * dim)
            .map(|k| ScalarField::constant(if k % (dim + 1) == 0 { a } else { 0.0 }))
            .collect();
        p.convection = b.iter().map(|&v| ScalarField::constant(v)).collect();
        p.reaction = ScalarField::constant(c);
        p
    }

    pub fn with_source(mut self, f1: ScalarField) -> Self {
        self.f1 = f1;
        self
    }

    pub fn with_flux_source(mut self, f2: Vec<ScalarField>) -> Self {
        assert_eq!(f2.len(), self.dim);
        self.f2 = f2;
        self
    }

    pub fn with_initial(mut self, u0: ScalarField) -> Self {
        self.u0 = u0;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn a(&self, p: &[f64], k: usize, l: usize) -> f64 {
        self.diffusion[k * self.dim + l].eval(p)
    }

    /// Checks symmetry, positivity and finiteness of the coefficients at the
    /// assembly quadrature points of `space`.
    pub fn validate(&self, space: &FeSpace) -> Result<(), FoslsError> {
        let d = self.dim;
        if space.dim() != d || self.diffusion.len() != d * d || self.convection.len() != d || self.f2.len() != d {
            return Err(FoslsError::InvalidCoefficient(format!(
                "coefficient shapes do not match spatial dimension {d}"
            )));
        }
        let zero = vec![0.0; space.n_dofs()];
        let worst = integrate_fe(space, &zero, Region::Cells, 2, |p, _| {
            let mut bad = 0.0;
            for k in 0..d {
                for l in 0..d {
                    let (x, y) = (self.a(p, k, l), self.a(p, l, k));
                    if !x.is_finite() || (x - y).abs() > 1e-12 * x.abs().max(1.0) {
                        bad = 1.0;
                    }
                }
            }
            let min_eig = match d {
                1 => self.a(p, 0, 0),
                _ => {
                    let (a, b, c) = (self.a(p, 0, 0), self.a(p, 0, 1), self.a(p, 1, 1));
                    0.5 * (a + c) - (0.25 * (a - c).powi(2) + b * b).sqrt()
                }
            };
            if !(min_eig > 0.0) {
                bad = 1.0;
            }
            let others = self.convection.iter().map(|f| f.eval(p)).chain([self.reaction.eval(p)]);
            if others.into_iter().any(|v| !v.is_finite()) {
                bad = 1.0;
            }
            bad
        });
        if worst > 0.0 {
            return Err(FoslsError::InvalidCoefficient(
                "A must be symmetric positive definite and all coefficients finite".into(),
            ));
        }
        Ok(())
    }

    /// The `Q`-part of `G u` at a point: `(div u + b·∇ₓu₁ + c u₁, −u₂ − A∇ₓu₁)`.
    pub fn apply_g(&self, p: &[f64], u: &FeValue, out: &mut [f64]) {
        let d = self.dim;
        let g1 = u.grad(0);
        let mut first = u.divergence() + self.reaction.eval(p) * u.value(0);
        for k in 0..d {
            first += self.convection[k].eval(p) * g1[1 + k];
        }
        out[0] = first;
        for k in 0..d {
            out[1 + k] = -u.value(1 + k) - (0..d).map(|l| self.a(p, k, l) * g1[1 + l]).sum::<f64>();
        }
    }

    /// `(f₁, f₂)` at a point.
    pub fn data(&self, p: &[f64], out: &mut [f64]) {
        out[0] = self.f1.eval(p);
        for k in 0..self.dim {
            out[1 + k] = self.f2[k].eval(p);
        }
    }
}

/// Features of the `Q`-part of `G`, width `d+1`.
pub struct GKernel<'a>(pub &'a FoslsProblem);

impl FormKernel for GKernel<'_> {
    fn width(&self) -> usize {
        self.0.dim + 1
    }
    fn features(&self, p: &[f64], comp: usize, v: f64, g: &[f64], out: &mut [f64]) {
        let pr = self.0;
        let d = pr.dim;
        out.fill(0.0);
        if comp == 0 {
            out[0] = g[0] + pr.reaction.eval(p) * v;
            for k in 0..d {
                out[0] += pr.convection[k].eval(p) * g[1 + k];
                out[1 + k] = -(0..d).map(|l| pr.a(p, k, l) * g[1 + l]).sum::<f64>();
            }
        } else {
            out[0] = g[comp];
            out[comp] = -v;
        }
    }
}

/// Trace `v ↦ v₁`, width 1.
pub struct TraceKernel;

impl FormKernel for TraceKernel {
    fn width(&self) -> usize {
        1
    }
    fn features(&self, _p: &[f64], comp: usize, v: f64, _g: &[f64], out: &mut [f64]) {
        out[0] = if comp == 0 { v } else { 0.0 };
    }
}

/// Features of the `U` graph norm `(u₁, ∇ₓu₁, u₂, div u)`, width `2d+2`.
pub struct GraphNormKernel {
    pub dim: usize,
}

impl FormKernel for GraphNormKernel {
    fn width(&self) -> usize {
        2 * self.dim + 2
    }
    fn features(&self, _p: &[f64], comp: usize, v: f64, g: &[f64], out: &mut [f64]) {
        let d = self.dim;
        out.fill(0.0);
        if comp == 0 {
            out[0] = v;
            out[1..=d].copy_from_slice(&g[1..=d]);
            out[2 * d + 1] = g[0];
        } else {
            out[d + comp] = v;
            out[2 * d + 1] = g[comp];
        }
    }
}

/// Quadrature degree for assembly on the discretization of `space`.
pub fn assembly_degree(space: &FeSpace) -> usize {
    if space.basis().degree() >= 2 {
        TENSOR_ERROR_DEGREE
    } else {
        ASSEMBLY_DEGREE
    }
}

/// Quadrature degree for norms against closed forms.
pub fn error_degree(space: &FeSpace) -> usize {
    if space.basis().degree() >= 2 {
        TENSOR_ERROR_DEGREE
    } else {
        ERROR_DEGREE
    }
}

/// Assembled least-squares system on the free dofs.
#[derive(Debug, Clone)]
pub struct FoslsSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

/// `⟨Gφⱼ, Gφᵢ⟩_L` over all dofs, constrained ones included.
pub fn assemble_g_matrix_full(problem: &FoslsProblem, space: &FeSpace) -> Result<CsrMatrix, FoslsError> {
    let deg = assembly_degree(space);
    let g = GKernel(problem);
    let q = assemble_matrix(space, space, Region::Cells, deg, &g, &g)?;
    let i = assemble_matrix(space, space, Region::Facets(BoundaryTag::Initial), deg, &TraceKernel, &TraceKernel)?;
    Ok(CsrMatrix::linear_combination(&[1.0, 1.0], &[&q, &i]))
}

/// `⟨f, Gφᵢ⟩_L` over all dofs.
pub fn assemble_g_load_full(problem: &FoslsProblem, space: &FeSpace) -> Vec<f64> {
    let deg = assembly_degree(space);
    let mut l = assemble_vector(space, Region::Cells, deg, &GKernel(problem), |p, out| problem.data(p, out));
    let l0 = assemble_vector(space, Region::Facets(BoundaryTag::Initial), deg, &TraceKernel, |p, out| {
        out[0] = problem.u0.eval(p)
    });
    for (a, b) in l.iter_mut().zip(l0) {
        *a += b;
    }
    l
}

pub fn assemble_fosls(problem: &FoslsProblem, space: &FeSpace) -> Result<FoslsSystem, FoslsError> {
    if space.components() != problem.dim + 1 {
        return Err(FoslsError::Fem(FemError::Mismatch(format!(
            "FOSLS needs {} components, space has {}",
            problem.dim + 1,
            space.components()
        ))));
    }
    problem.validate(space)?;
    let full = assemble_g_matrix_full(problem, space)?;
    let free = space.free_dofs();
    let matrix = full.submatrix(free, free);
    let rhs = space.restrict(&assemble_g_load_full(problem, space));
    Ok(FoslsSystem { matrix, rhs })
}

/// Galerkin solution (full coefficient vector) and its algebraic residual.
#[derive(Debug, Clone)]
pub struct FoslsSolution {
    pub coeffs: Vec<f64>,
    pub algebraic_residual: f64,
}

pub fn solve_fosls(
    problem: &FoslsProblem,
    space: &FeSpace,
    solver: &dyn SpdSolver,
) -> Result<FoslsSolution, FoslsError> {
    let sys = assemble_fosls(problem, space)?;
    solve_system(&sys, space, solver)
}

pub fn solve_system(sys: &FoslsSystem, space: &FeSpace, solver: &dyn SpdSolver) -> Result<FoslsSolution, FoslsError> {
    let x = solver.solve(&sys.matrix, &sys.rhs)?;
    let res = relative_residual(&sys.matrix, &x, &sys.rhs);
    if res > 1e-10 {
        return Err(FoslsError::Inaccurate { residual: res, tol: 1e-10 });
    }
    Ok(FoslsSolution {
        coeffs: space.expand(&x),
        algebraic_residual: res,
    })
}

/// `‖f − G u‖²_L` split into its `Q` part and its initial-trace part.
pub fn residual_parts(problem: &FoslsProblem, space: &FeSpace, coeffs: &[f64], degree: usize) -> (f64, f64) {
    let n = problem.dim + 1;
    let q = integrate_fe(space, coeffs, Region::Cells, degree, |p, v| {
        let mut g = [0.0; 3];
        let mut f = [0.0; 3];
        problem.apply_g(p, v, &mut g[..n]);
        problem.data(p, &mut f[..n]);
        (0..n).map(|r| (f[r] - g[r]).powi(2)).sum()
    });
    let i = integrate_fe(space, coeffs, Region::Facets(BoundaryTag::Initial), degree, |p, v| {
        (problem.u0.eval(p) - v.value(0)).powi(2)
    });
    (q, i)
}

/// `‖f − G u‖_L` by elevated quadrature.
pub fn residual_estimator(problem: &FoslsProblem, space: &FeSpace, coeffs: &[f64]) -> f64 {
    let (q, i) = residual_parts(problem, space, coeffs, error_degree(space));
    (q + i).sqrt()
}

/// Gram matrix of `⟨·,·⟩_U` on the free dofs.
pub fn assemble_u_gram(space: &FeSpace) -> Result<CsrMatrix, FoslsError> {
    let k = GraphNormKernel { dim: space.dim() };
    let full = assemble_matrix(space, space, Region::Cells, assembly_degree(space), &k, &k)?;
    Ok(full.submatrix(space.free_dofs(), space.free_dofs()))
}
