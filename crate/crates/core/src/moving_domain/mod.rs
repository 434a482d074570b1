//! Parabolic problems on space-time polytopes whose spatial cross-section
//! moves in time, described by `κ(t, x̂) = (t, κ′(t, x̂))`.

mod piola;

use std::f64::consts::PI;
use std::sync::Arc;

use crate::fem::{integrate_fe, FeSpace, Region, ScalarField};
use crate::fosls::{error_degree, residual_estimator, solve_fosls, FoslsError, FoslsProblem};
use crate::linalg::SpdSolver;
use crate::mesh::{build_moving_domain_mesh, BoundaryTag, MeshError, SpaceTimeMesh};

pub use piola::{verify_piola_identities, PiolaReport, VectorField};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Profile {
    Identity,
    /// `s(t) = |t − ½| + ½`
    Pinched,
}

/// `κ′(t, x̂) = s(t)(x̂ − ½) + ½` acting on every spatial coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeformationMap {
    dim: usize,
    profile: Profile,
}

impl DeformationMap {
    pub fn identity(dim: usize) -> Self {
        Self { dim, profile: Profile::Identity }
    }

    /// Cross-section shrinking to half width at `t = ½` and recovering at `t = 1`.
    pub fn pinched(dim: usize) -> Self {
        Self { dim, profile: Profile::Pinched }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scale(&self, t: f64) -> f64 {
        match self.profile {
            Profile::Identity => 1.0,
            Profile::Pinched => (t - 0.5).abs() + 0.5,
        }
    }

    /// `s′(t)`; one-sided at the kink, taking the later side.
    pub fn scale_rate(&self, t: f64) -> f64 {
        match self.profile {
            Profile::Identity => 0.0,
            Profile::Pinched => {
                if t < 0.5 {
                    -1.0
                } else {
                    1.0
                }
            }
        }
    }

    /// `κ(t, x̂)`
    pub fn forward(&self, p: &[f64]) -> Vec<f64> {
        let s = self.scale(p[0]);
        let mut out = vec![p[0]];
        out.extend(p[1..].iter().map(|x| s * (x - 0.5) + 0.5));
        out
    }

    /// `κ⁻¹(t, x)`
    pub fn inverse(&self, p: &[f64]) -> Vec<f64> {
        let s = self.scale(p[0]);
        let mut out = vec![p[0]];
        out.extend(p[1..].iter().map(|x| (x - 0.5) / s + 0.5));
        out
    }

    /// `∂ₜκ′(t, x̂)`
    pub fn time_derivative(&self, p: &[f64]) -> Vec<f64> {
        let r = self.scale_rate(p[0]);
        p[1..].iter().map(|x| r * (x - 0.5)).collect()
    }

    /// `D_x̂ κ′`, row-major `d × d`.
    pub fn spatial_jacobian(&self, p: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let s = self.scale(p[0]);
        (0..d * d).map(|k| if k / d == k % d { s } else { 0.0 }).collect()
    }

    /// `det Dκ = det D_x̂ κ′`
    pub fn det(&self, p: &[f64]) -> f64 {
        self.scale(p[0]).powi(self.dim as i32)
    }

    /// `∇_x̂ det Dκ`
    pub fn det_gradient(&self, _p: &[f64]) -> Vec<f64> {
        vec![0.0; self.dim]
    }

    /// Full `Dκ`, row-major `(d+1) × (d+1)` in `(t, x)` ordering.
    pub fn jacobian(&self, p: &[f64]) -> Vec<f64> {
        let (d, n) = (self.dim, self.dim + 1);
        let mut j = vec![0.0; n * n];
        j[0] = 1.0;
        let dt = self.time_derivative(p);
        let dx = self.spatial_jacobian(p);
        for r in 0..d {
            j[(1 + r) * n] = dt[r];
            for c in 0..d {
                j[(1 + r) * n + 1 + c] = dx[r * d + c];
            }
        }
        j
    }
}

/// `u(κ(t, x̂)) = ∏ sin(πx̂ₖ)` on the pinched polytope with heat data
/// `f₁ = ∂ₜu − Δₓu`, `f₂ = 0`, `u₀ = u(0,·)`.
#[derive(Debug, Clone)]
pub struct MovingCase {
    pub map: DeformationMap,
    pub problem: FoslsProblem,
    /// `u` with its space-time gradient.
    pub u: ScalarField,
}

fn profile_terms(map: &DeformationMap, p: &[f64]) -> (Vec<f64>, f64, f64) {
    let xh = map.inverse(p);
    (xh[1..].to_vec(), map.scale(p[0]), map.scale_rate(p[0]))
}

fn exact_value(map: &DeformationMap, p: &[f64]) -> f64 {
    let (xh, _, _) = profile_terms(map, p);
    xh.iter().map(|x| (PI * x).sin()).product()
}

fn exact_gradient(map: &DeformationMap, p: &[f64]) -> Vec<f64> {
    let (xh, s, ds) = profile_terms(map, p);
    let d = xh.len();
    let others = |k: usize| -> f64 { (0..d).filter(|&l| l != k).map(|l| (PI * xh[l]).sin()).product() };
    let mut g = vec![0.0; d + 1];
    for k in 0..d {
        let c = PI * (PI * xh[k]).cos() * others(k);
        g[0] += c * (-(xh[k] - 0.5) * ds / s);
        g[1 + k] = c / s;
    }
    g
}

pub fn build_moving_case(dim: usize) -> Option<MovingCase> {
    if !(1..=2).contains(&dim) {
        return None;
    }
    let map = DeformationMap::pinched(dim);
    let u = ScalarField::new(move |p| exact_value(&map, p)).with_gradient(move |p| exact_gradient(&map, p));
    let f1 = ScalarField::new(move |p| {
        let s = map.scale(p[0]);
        exact_gradient(&map, p)[0] + dim as f64 * PI * PI / (s * s) * exact_value(&map, p)
    });
    let u0 = ScalarField::new(move |p| exact_value(&map, p));
    Some(MovingCase {
        map,
        problem: FoslsProblem::heat(dim).with_source(f1).with_initial(u0),
        u,
    })
}

impl MovingCase {
    pub fn dim(&self) -> usize {
        self.map.dim()
    }

    /// Initial mesh refined uniformly `level` times.
    pub fn mesh(&self, level: usize) -> Result<SpaceTimeMesh, MeshError> {
        build_moving_domain_mesh(self.dim())?.refine_uniform_times(level)
    }

    /// `u₂ = −∇ₓu`
    pub fn flux(&self, p: &[f64]) -> Vec<f64> {
        self.u.gradient(p)[1..].iter().map(|g| -g).collect()
    }
}

/// One refinement level of a moving-domain run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MovingErrors {
    pub ndof: usize,
    /// `‖f − G u^δ‖_L`
    pub est: f64,
    pub err_y: f64,
    pub err_0: f64,
    pub err_t: f64,
    pub err_l2: f64,
}

impl MovingErrors {
    pub const HEADER: &'static str = "ndof,est,err_Y,err_0,err_T,err_l2";

    pub fn row(&self) -> [f64; 6] {
        [self.ndof as f64, self.est, self.err_y, self.err_0, self.err_t, self.err_l2]
    }
}

pub fn moving_error_report(case: &MovingCase, space: &FeSpace, coeffs: &[f64]) -> MovingErrors {
    let d = case.dim();
    let deg = error_degree(space);
    let l2 = |region| integrate_fe(space, coeffs, region, deg, |p, v| (case.u.eval(p) - v.value(0)).powi(2)).sqrt();
    let err_y = integrate_fe(space, coeffs, Region::Cells, deg, |p, v| {
        let g = case.u.gradient(p);
        (0..d).map(|k| (g[1 + k] - v.grad(0)[1 + k]).powi(2)).sum()
    })
    .sqrt();
    MovingErrors {
        ndof: space.n_free(),
        est: residual_estimator(&case.problem, space, coeffs),
        err_y,
        err_0: l2(Region::Facets(BoundaryTag::Initial)),
        err_t: l2(Region::Facets(BoundaryTag::Final)),
        err_l2: l2(Region::Cells),
    }
}

/// FOSLS solve on the `level`-times refined polytope mesh.
pub fn solve_moving(case: &MovingCase, level: usize, solver: &dyn SpdSolver) -> Result<(FeSpace, Vec<f64>, MovingErrors), FoslsError> {
    let mesh = case.mesh(level)?;
    let space = FeSpace::p1_system(Arc::new(mesh));
    let sol = solve_fosls(&case.problem, &space, solver)?;
    let report = moving_error_report(case, &space, &sol.coeffs);
    Ok((space, sol.coeffs, report))
}
