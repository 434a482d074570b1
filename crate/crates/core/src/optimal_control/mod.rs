//! Optimal control of a least-squares constrained parabolic problem:
//! minimize `½‖F u − w★‖²_W + ϱ/2 ‖z‖²` subject to `G u = f★ + (z, 0, 0)`,
//! solved as the saddle-point system in `(u, z, p)`.

mod estimators;
mod manufactured;

use std::sync::Arc;

use crate::fem::{assemble_matrix, assemble_vector, kernel, FeSpace, FemError, FormKernel, Region, ScalarField};
use crate::fosls::{assemble_fosls, assembly_degree, FoslsError, FoslsProblem, GKernel, TraceKernel};
use crate::linalg::{control_optimality_residual, BlockSaddleMatrix, CsrMatrix, SaddleSolver};
use crate::mesh::{BoundaryTag, SpaceTimeMesh};

pub use estimators::{
    control_error_report, efficient_estimator, first_term_functional, reliable_bound_terms, ControlErrors,
    EfficientEstimate, ReliableTerms, SmoothCostate,
};
pub use manufactured::{build_manufactured_case, ManufacturedControlCase};

/// `F v = (χ₁v₁, χ₂v₂, χ₃v₁(T))` with desired observation `w★ = (w₁, w₂, w₃)`;
/// absent weights are zero. Controls act on the first `L` component only.
#[derive(Debug, Clone)]
pub struct ControlProblem {
    pub state: FoslsProblem,
    pub chi1: Option<ScalarField>,
    pub chi2: Option<ScalarField>,
    pub chi3: Option<ScalarField>,
    pub w1: ScalarField,
    pub w2: Vec<ScalarField>,
    pub w3: ScalarField,
    pub rho: f64,
}

impl ControlProblem {
    /// Tracking of `v₁` in `L₂(Q)`: `χ₁ = 1`, `χ₂ = χ₃ = 0`.
    pub fn tracking(state: FoslsProblem, w1: ScalarField, rho: f64) -> Self {
        let d = state.dim();
        Self {
            state,
            chi1: Some(ScalarField::constant(1.0)),
            chi2: None,
            chi3: None,
            w1,
            w2: vec![ScalarField::zero(); d],
            w3: ScalarField::zero(),
            rho,
        }
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    fn validate(&self) -> Result<(), FoslsError> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(FoslsError::InvalidCoefficient(format!("ϱ must be positive, got {}", self.rho)));
        }
        Ok(())
    }
}

struct ObservationKernel<'a> {
    cp: &'a ControlProblem,
}

impl FormKernel for ObservationKernel<'_> {
    fn width(&self) -> usize {
        self.cp.state.dim() + 1
    }
    fn features(&self, p: &[f64], comp: usize, v: f64, _g: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let w = match (comp, &self.cp.chi1, &self.cp.chi2) {
            (0, Some(c), _) => c.eval(p),
            (k, _, Some(c)) if k > 0 => c.eval(p),
            _ => 0.0,
        };
        out[comp] = w * v;
    }
}

struct FinalKernel<'a> {
    chi3: &'a ScalarField,
}

impl FormKernel for FinalKernel<'_> {
    fn width(&self) -> usize {
        1
    }
    fn features(&self, p: &[f64], comp: usize, v: f64, _g: &[f64], out: &mut [f64]) {
        out[0] = if comp == 0 { self.chi3.eval(p) * v } else { 0.0 };
    }
}

/// `d(u, v) = ⟨F u, F v⟩_W` over all dofs.
pub fn assemble_observation_full(cp: &ControlProblem, space: &FeSpace) -> Result<CsrMatrix, FemError> {
    let deg = assembly_degree(space);
    let k = ObservationKernel { cp };
    let mut d = assemble_matrix(space, space, Region::Cells, deg, &k, &k)?;
    if let Some(chi3) = &cp.chi3 {
        let f = FinalKernel { chi3 };
        let t = assemble_matrix(space, space, Region::Facets(BoundaryTag::Final), deg, &f, &f)?;
        d = CsrMatrix::linear_combination(&[1.0, 1.0], &[&d, &t]);
    }
    Ok(d)
}

/// `g★(v) = ⟨F v, w★⟩_W` over all dofs.
pub fn assemble_observation_load_full(cp: &ControlProblem, space: &FeSpace) -> Vec<f64> {
    let deg = assembly_degree(space);
    let d = cp.state.dim();
    let mut g = assemble_vector(space, Region::Cells, deg, &ObservationKernel { cp }, |p, out| {
        out[0] = cp.w1.eval(p);
        for k in 0..d {
            out[1 + k] = cp.w2[k].eval(p);
        }
    });
    if let Some(chi3) = &cp.chi3 {
        let t = assemble_vector(space, Region::Facets(BoundaryTag::Final), deg, &FinalKernel { chi3 }, |p, out| {
            out[0] = cp.w3.eval(p)
        });
        g.iter_mut().zip(t).for_each(|(a, b)| *a += b);
    }
    g
}

/// Block operator and right-hand sides on the free state dofs.
#[derive(Debug, Clone)]
pub struct ControlSystem {
    pub blocks: BlockSaddleMatrix,
    pub g_u: Vec<f64>,
    pub g_z: Vec<f64>,
    pub f: Vec<f64>,
}

pub fn assemble_control_system(cp: &ControlProblem, u_space: &FeSpace, z_space: &FeSpace) -> Result<ControlSystem, FoslsError> {
    cp.validate()?;
    if !u_space.same_cells(z_space) || z_space.components() != 1 {
        return Err(FemError::Mismatch("control space must be scalar on the state cells".into()).into());
    }
    let free = u_space.free_dofs();
    let sys = assemble_fosls(&cp.state, u_space)?;
    let d = assemble_observation_full(cp, u_space)?.submatrix(free, free);
    let deg = assembly_degree(u_space);
    let mut e = assemble_matrix(z_space, z_space, Region::Cells, deg, &TraceKernel, &TraceKernel)?;
    e.scale(cp.rho);
    let n = cp.state.dim() + 1;
    let control = kernel(n, |_p, _c, v, _g, out: &mut [f64]| {
        out.fill(0.0);
        out[0] = v;
    });
    let mut b = assemble_matrix(u_space, z_space, Region::Cells, deg, &GKernel(&cp.state), &control)?;
    b.scale(-1.0);
    let all_z: Vec<usize> = (0..z_space.n_dofs()).collect();
    let b = b.submatrix(free, &all_z);
    let g_u = u_space.restrict(&assemble_observation_load_full(cp, u_space));
    let blocks = BlockSaddleMatrix::new(d, e, sys.matrix, b)?;
    Ok(ControlSystem {
        blocks,
        g_u,
        g_z: vec![0.0; z_space.n_dofs()],
        f: sys.rhs,
    })
}

/// Galerkin triple with full state and co-state coefficient vectors.
#[derive(Debug, Clone)]
pub struct ControlSolution {
    pub u: Vec<f64>,
    pub z: Vec<f64>,
    pub p: Vec<f64>,
    /// Unknowns of the saddle system, `2·free(U) + dim(Z)`.
    pub ndof: usize,
    pub residual: f64,
    pub optimality_residual: f64,
    pub iterations: usize,
}

pub fn solve_control(
    cp: &ControlProblem,
    u_space: &FeSpace,
    z_space: &FeSpace,
    solver: &dyn SaddleSolver,
) -> Result<ControlSolution, FoslsError> {
    let sys = assemble_control_system(cp, u_space, z_space)?;
    solve_control_system(&sys, u_space, solver)
}

pub fn solve_control_system(sys: &ControlSystem, u_space: &FeSpace, solver: &dyn SaddleSolver) -> Result<ControlSolution, FoslsError> {
    let sol = solver.solve(&sys.blocks, &sys.g_u, &sys.g_z, &sys.f)?;
    if sol.residual > 1e-9 {
        return Err(FoslsError::Inaccurate { residual: sol.residual, tol: 1e-9 });
    }
    let opt = control_optimality_residual(&sys.blocks, &sol.z, &sol.p, &sys.g_z);
    Ok(ControlSolution {
        u: u_space.expand(&sol.u),
        p: u_space.expand(&sol.p),
        ndof: 2 * sys.blocks.nu() + sys.blocks.nz(),
        z: sol.z,
        residual: sol.residual,
        optimality_residual: opt,
        iterations: sol.iterations,
    })
}

/// State/co-state space (P1, `d+1` components, constrained) and control
/// space (P0) on one mesh.
pub fn control_spaces(mesh: Arc<SpaceTimeMesh>) -> (FeSpace, FeSpace) {
    (FeSpace::p1_system(mesh.clone()), FeSpace::p0(mesh))
}
