use std::sync::Arc;

use super::{assemble_observation_full, assemble_observation_load_full, ControlProblem, ControlSolution, ManufacturedControlCase};
use crate::fem::{integrate_fe, integrate_fe_multi, FeSpace, FeValue, Region, ScalarField};
use crate::fosls::{assemble_g_matrix_full, assemble_u_gram, error_degree, FoslsError};
use crate::linalg::{dot, spd_solvers};
use crate::mesh::{BoundaryTag, SpaceTimeMesh};

/// Errors of a Galerkin triple against the manufactured closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlErrors {
    pub ndof: usize,
    /// `‖f★ + z − G u^δ‖_L = ‖G(u − u^δ)‖_L`
    pub err_u: f64,
    /// `‖∇ₓ(u − u₁^δ)‖_{L₂(Q)}`
    pub err_y: f64,
    pub err_0: f64,
    pub err_t: f64,
    pub err_l2: f64,
    pub err_z1: f64,
    pub err_j: f64,
    /// `‖ℓ − G p^δ‖_L = ‖G(p − p^δ)‖_L`
    pub err_p: f64,
    /// `J(u^δ, z^δ)`
    pub cost: f64,
}

impl ControlErrors {
    pub const HEADER: &'static str = "ndof,err_U,err_Y,err_0,err_T,err_l2,err_z1,err_J,err_p";

    pub fn row(&self) -> [f64; 9] {
        [
            self.ndof as f64,
            self.err_u,
            self.err_y,
            self.err_0,
            self.err_t,
            self.err_l2,
            self.err_z1,
            self.err_j,
            self.err_p,
        ]
    }
}

pub fn control_error_report(
    case: &ManufacturedControlCase,
    u_space: &FeSpace,
    z_space: &FeSpace,
    sol: &ControlSolution,
) -> ControlErrors {
    let d = case.dim;
    let n = d + 1;
    let deg = error_degree(u_space);
    let state = &case.problem.state;
    let fns = [(u_space, &sol.u[..]), (z_space, &sol.z[..]), (u_space, &sol.p[..])];
    let cell = |f: &(dyn Fn(&[f64], &[FeValue]) -> f64 + Sync)| integrate_fe_multi(&fns, Region::Cells, deg, f);
    let facet = |tag, f: &(dyn Fn(&[f64], &[FeValue]) -> f64 + Sync)| integrate_fe_multi(&fns, Region::Facets(tag), deg, f);

    let err_u = (cell(&|p, v| {
        let mut g = [0.0; 3];
        state.apply_g(p, &v[0], &mut g[..n]);
        (case.state_source.eval(p) - g[0]).powi(2) + g[1..n].iter().map(|x| x * x).sum::<f64>()
    }) + facet(BoundaryTag::Initial, &|p, v| (case.u.eval(p) - v[0].value(0)).powi(2)))
    .sqrt();
    let err_p = (cell(&|p, v| {
        let mut g = [0.0; 3];
        state.apply_g(p, &v[2], &mut g[..n]);
        let l2 = case.ell2(p);
        (case.ell1.eval(p) - g[0]).powi(2) + (0..d).map(|k| (l2[k] - g[1 + k]).powi(2)).sum::<f64>()
    }) + facet(BoundaryTag::Initial, &|p, v| (case.ell1.eval(p) - v[2].value(0)).powi(2)))
    .sqrt();
    let err_y = cell(&|p, v| {
        let gu = case.u.gradient(p);
        (0..d).map(|k| (gu[1 + k] - v[0].grad(0)[1 + k]).powi(2)).sum()
    })
    .sqrt();
    let err_l2 = cell(&|p, v| (case.u.eval(p) - v[0].value(0)).powi(2)).sqrt();
    let err_0 = facet(BoundaryTag::Initial, &|p, v| (case.u.eval(p) - v[0].value(0)).powi(2)).sqrt();
    let err_t = facet(BoundaryTag::Final, &|p, v| (case.u.eval(p) - v[0].value(0)).powi(2)).sqrt();
    let err_z1 = cell(&|p, v| (case.z.eval(p) - v[1].value(0)).powi(2)).sqrt();
    let cp = &case.problem;
    let cost = cell(&|p, v| 0.5 * (v[0].value(0) - cp.w1.eval(p)).powi(2) + 0.5 * cp.rho * v[1].value(0).powi(2));
    ControlErrors {
        ndof: sol.ndof,
        err_u,
        err_y,
        err_0,
        err_t,
        err_l2,
        err_z1,
        err_j: (case.exact_cost() - cost).abs(),
        err_p,
        cost,
    }
}

/// `r(v) = ⟨F v, w★ − F u⟩_W − ⟨G v, G p⟩_L` on the free dofs of `space`,
/// `u` and `p` given by full coefficients on `space`.
pub fn first_term_functional(cp: &ControlProblem, space: &FeSpace, u: &[f64], p: &[f64]) -> Result<Vec<f64>, FoslsError> {
    let mut r = assemble_observation_load_full(cp, space);
    let du = assemble_observation_full(cp, space)?.mul_vec(u);
    let ap = assemble_g_matrix_full(&cp.state, space)?.mul_vec(p);
    for ((ri, a), b) in r.iter_mut().zip(du).zip(ap) {
        *ri -= a + b;
    }
    Ok(space.restrict(&r))
}

/// The three terms of the efficient estimator and their Euclidean sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficientEstimate {
    /// `sup` of the first-term functional over one uniform refinement.
    pub first: f64,
    /// `‖f★ + z^δ − G u^δ‖_L`
    pub second: f64,
    /// `‖(G p^δ)₁ − ϱ z^δ‖_{L₂(Q)}`
    pub third: f64,
    pub total: f64,
}

fn prolongate(fine: &SpaceTimeMesh, coarse_space: &FeSpace, fine_space: &FeSpace, x: &[f64]) -> Vec<f64> {
    let (nc, nf) = (coarse_space.n_scalar(), fine_space.n_scalar());
    let mut out = vec![0.0; fine_space.n_dofs()];
    for c in 0..coarse_space.components() {
        let v = SpaceTimeMesh::prolongate_p1(fine, &x[c * nc..(c + 1) * nc]);
        out[c * nf..(c + 1) * nf].copy_from_slice(&v);
    }
    out
}

pub fn efficient_estimator(
    cp: &ControlProblem,
    mesh: &Arc<SpaceTimeMesh>,
    u_space: &FeSpace,
    z_space: &FeSpace,
    sol: &ControlSolution,
) -> Result<EfficientEstimate, FoslsError> {
    let fine = Arc::new(mesh.refine_uniform()?);
    let fine_space = FeSpace::p1_system(fine.clone());
    let uf = prolongate(&fine, u_space, &fine_space, &sol.u);
    let pf = prolongate(&fine, u_space, &fine_space, &sol.p);
    let r = first_term_functional(cp, &fine_space, &uf, &pf)?;
    let m = assemble_u_gram(&fine_space)?;
    let x = spd_solvers().create("cholesky").expect("registered").solve(&m, &r)?;
    let first = dot(&r, &x).max(0.0).sqrt();

    let n = cp.state.dim() + 1;
    let deg = error_degree(u_space);
    let fns = [(u_space, &sol.u[..]), (z_space, &sol.z[..]), (u_space, &sol.p[..])];
    let second = (integrate_fe_multi(&fns, Region::Cells, deg, |p, v| {
        let (mut g, mut f) = ([0.0; 3], [0.0; 3]);
        cp.state.apply_g(p, &v[0], &mut g[..n]);
        cp.state.data(p, &mut f[..n]);
        f[0] += v[1].value(0);
        (0..n).map(|k| (f[k] - g[k]).powi(2)).sum()
    }) + integrate_fe_multi(&fns, Region::Facets(BoundaryTag::Initial), deg, |p, v| {
        (cp.state.u0.eval(p) - v[0].value(0)).powi(2)
    }))
    .sqrt();
    let third = integrate_fe_multi(&fns, Region::Cells, deg, |p, v| {
        let mut g = [0.0; 3];
        cp.state.apply_g(p, &v[2], &mut g[..n]);
        (g[0] - cp.rho * v[1].value(0)).powi(2)
    })
    .sqrt();
    Ok(EfficientEstimate {
        first,
        second,
        third,
        total: (first * first + second * second + third * third).sqrt(),
    })
}

/// Candidate `ℓ̃ = (ℓ̃₁, ℓ̃₂, ℓ̃₁(0))` for the reliable bound; fields should
/// carry analytic gradients.
#[derive(Debug, Clone)]
pub struct SmoothCostate {
    pub l1: ScalarField,
    pub l2: Vec<ScalarField>,
}

impl SmoothCostate {
    pub fn zero(dim: usize) -> Self {
        Self {
            l1: ScalarField::zero(),
            l2: vec![ScalarField::zero(); dim],
        }
    }
}

impl ManufacturedControlCase {
    /// The exact `ℓ = G p` as a candidate.
    pub fn exact_costate(&self) -> SmoothCostate {
        let d = self.dim;
        let l2 = (0..d)
            .map(|k| {
                let c = self.clone();
                let g = self.clone();
                ScalarField::new(move |p| c.ell2(p)[k]).with_gradient(move |p| {
                    let h = 1e-5;
                    let mut q = p.to_vec();
                    (0..p.len())
                        .map(|j| {
                            q[j] = p[j] + h;
                            let a = g.ell2(&q)[k];
                            q[j] = p[j] - h;
                            let b = g.ell2(&q)[k];
                            q[j] = p[j];
                            (a - b) / (2.0 * h)
                        })
                        .collect()
                })
            })
            .collect();
        SmoothCostate { l1: self.ell1.clone(), l2 }
    }
}

/// The four terms of the reliable upper bound for the first estimator term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReliableTerms {
    /// `‖ℓ̃ − G p^δ‖_L`
    pub costate_gap: f64,
    /// Backward-equation residual in `L₂(Q)`.
    pub backward: f64,
    /// `‖−∇ₓℓ̃₁ − ℓ̃₂ − χ₂(w₂ − χ₂u₂^δ)‖`
    pub gradient: f64,
    /// `‖ℓ̃₁(T) − χ₃(w₃ − χ₃u₁^δ(T))‖_{L₂(Ω)}`
    pub terminal: f64,
}

pub fn reliable_bound_terms(
    cp: &ControlProblem,
    u_space: &FeSpace,
    sol: &ControlSolution,
    ell: &SmoothCostate,
) -> Result<ReliableTerms, FoslsError> {
    let st = &cp.state;
    let d = st.dim();
    let n = d + 1;
    let deg = error_degree(u_space);
    let zero = vec![0.0; u_space.n_dofs()];
    let lateral = integrate_fe(u_space, &zero, Region::Facets(BoundaryTag::Lateral), deg, |p, _| ell.l1.eval(p).powi(2));
    let scale = integrate_fe(u_space, &zero, Region::Cells, deg, |p, _| ell.l1.eval(p).powi(2));
    if lateral.sqrt() > 1e-10 * scale.sqrt().max(1.0) {
        return Err(FoslsError::InvalidCoefficient(format!(
            "ℓ̃₁ must vanish on the lateral boundary (L₂ trace {:.3e})",
            lateral.sqrt()
        )));
    }
    let eval_chi = |c: &Option<ScalarField>, p: &[f64]| c.as_ref().map_or(0.0, |c| c.eval(p));

    let fns = [(u_space, &sol.u[..]), (u_space, &sol.p[..])];
    let costate_gap = (integrate_fe_multi(&fns, Region::Cells, deg, |p, v| {
        let mut g = [0.0; 3];
        st.apply_g(p, &v[1], &mut g[..n]);
        (ell.l1.eval(p) - g[0]).powi(2) + (0..d).map(|k| (ell.l2[k].eval(p) - g[1 + k]).powi(2)).sum::<f64>()
    }) + integrate_fe_multi(&fns, Region::Facets(BoundaryTag::Initial), deg, |p, v| {
        (ell.l1.eval(p) - v[1].value(0)).powi(2)
    }))
    .sqrt();

    let backward = integrate_fe(u_space, &sol.u, Region::Cells, deg, |p, v| {
        let g1 = ell.l1.gradient(p);
        let l1 = ell.l1.eval(p);
        let mut div_a_l2 = 0.0;
        let mut div_b = 0.0;
        let mut b_grad = 0.0;
        for k in 0..d {
            for l in 0..d {
                let a = &st.diffusion[k * d + l];
                div_a_l2 += a.gradient(p)[1 + k] * ell.l2[l].eval(p) + a.eval(p) * ell.l2[l].gradient(p)[1 + k];
            }
            div_b += st.convection[k].gradient(p)[1 + k];
            b_grad += st.convection[k].eval(p) * g1[1 + k];
        }
        let chi1 = eval_chi(&cp.chi1, p);
        let lhs = -g1[0] + div_a_l2 - b_grad + (st.reaction.eval(p) - div_b) * l1;
        (lhs - chi1 * (cp.w1.eval(p) - chi1 * v.value(0))).powi(2)
    })
    .sqrt();

    let gradient = integrate_fe(u_space, &sol.u, Region::Cells, deg, |p, v| {
        let g1 = ell.l1.gradient(p);
        let chi2 = eval_chi(&cp.chi2, p);
        (0..d)
            .map(|k| (-g1[1 + k] - ell.l2[k].eval(p) - chi2 * (cp.w2[k].eval(p) - chi2 * v.value(1 + k))).powi(2))
            .sum()
    })
    .sqrt();

    let terminal = integrate_fe(u_space, &sol.u, Region::Facets(BoundaryTag::Final), deg, |p, v| {
        let chi3 = eval_chi(&cp.chi3, p);
        (ell.l1.eval(p) - chi3 * (cp.w3.eval(p) - chi3 * v.value(0))).powi(2)
    })
    .sqrt();

    Ok(ReliableTerms {
        costate_gap,
        backward,
        gradient,
        terminal,
    })
}
