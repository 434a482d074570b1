mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use fosls::fem::{integrate_fe, integrate_fe_multi, FeSpace, Region, ScalarField, ERROR_DEGREE};
use fosls::fosls::{
    assemble_fosls, assemble_g_matrix_full, assemble_u_gram, residual_estimator, solve_fosls, solve_system,
    FoslsError, FoslsProblem, FoslsSystem,
};
use fosls::linalg::{spd_solvers, SpdSolver};
use fosls::mesh::{build_unit_cylinder_mesh, BoundaryTag, SpaceTimeMesh};
use nalgebra::{Matrix2, Vector2};

fn unit_square(levels: usize) -> Arc<SpaceTimeMesh> {
    Arc::new(
        build_unit_cylinder_mesh(1, "control-init")
            .unwrap()
            .refine_uniform_times(levels)
            .unwrap(),
    )
}

fn cholesky() -> Box<dyn SpdSolver> {
    spd_solvers().create("cholesky").unwrap()
}

fn heat_manufactured() -> FoslsProblem {
    FoslsProblem::heat(1)
        .with_source(ScalarField::new(|p| {
            (-PI * (PI * p[0]).sin() + PI * PI * (PI * p[0]).cos()) * (PI * p[1]).sin()
        }))
        .with_initial(ScalarField::new(|p| (PI * p[1]).sin()))
}

fn quad_form(m: &fosls::linalg::CsrMatrix, u: &[f64]) -> f64 {
    m.bilinear(u, u)
}

#[test]
fn trivial_quadratic_forms() {
    let mesh = unit_square(2);
    let space = FeSpace::p1_system(mesh.clone());
    let heat = FoslsProblem::heat(1);
    let a = assemble_g_matrix_full(&heat, &space).unwrap();
    let ns = space.n_scalar();

    let mut u = vec![0.0; space.n_dofs()];
    for v in 0..ns {
        u[v] = mesh.vertex(v)[0];
    }
    assert!((quad_form(&a, &u) - 1.0).abs() < 1e-13);

    let mut w = vec![0.0; space.n_dofs()];
    w[ns..].fill(1.0);
    assert!((quad_form(&a, &w) - 1.0).abs() < 1e-13);

    let g = fosls::fem::assemble_matrix(
        &space,
        &space,
        Region::Cells,
        4,
        &fosls::fosls::GraphNormKernel { dim: 1 },
        &fosls::fosls::GraphNormKernel { dim: 1 },
    )
    .unwrap();
    assert!((quad_form(&g, &u) - 4.0 / 3.0).abs() < 1e-13);
    assert_eq!(quad_form(&g, &vec![0.0; space.n_dofs()]), 0.0);
}

/// Per-cell oracle for `‖Gu‖²_L` and `‖u‖²_U` of a P1 pair on a 1+1D mesh,
/// using nodal gradients from the vertex coordinates and the edge-midpoint
/// rule, exact for quadratics on triangles.
fn oracle_norms(mesh: &SpaceTimeMesh, u1: &[f64], u2: &[f64]) -> (f64, f64) {
    let (mut gg, mut uu) = (0.0, 0.0);
    for c in 0..mesh.n_cells() {
        let v = mesh.cell(c);
        let p: Vec<Vector2<f64>> = v.iter().map(|&k| Vector2::from_column_slice(mesh.vertex(k))).collect();
        let j = Matrix2::from_columns(&[p[1] - p[0], p[2] - p[0]]);
        let area = 0.5 * j.determinant().abs();
        let jinv_t = j.try_inverse().unwrap().transpose();
        let grad = |f: &[f64]| jinv_t * Vector2::new(f[v[1]] - f[v[0]], f[v[2]] - f[v[0]]);
        let (g1, g2) = (grad(u1), grad(u2));
        let div = g1[0] + g2[1];
        for (a, b) in [(0, 1), (1, 2), (0, 2)] {
            let w = area / 3.0;
            let x1 = 0.5 * (u1[v[a]] + u1[v[b]]);
            let x2 = 0.5 * (u2[v[a]] + u2[v[b]]);
            gg += w * (div * div + (x2 + g1[1]).powi(2));
            uu += w * (x1 * x1 + g1[1] * g1[1] + x2 * x2 + div * div);
        }
        for (a, b) in [(0, 1), (1, 2), (0, 2)] {
            let (pa, pb) = (p[a], p[b]);
            if pa[0].abs() < 1e-14 && pb[0].abs() < 1e-14 {
                let len = (pa[1] - pb[1]).abs();
                let (fa, fb) = (u1[v[a]], u1[v[b]]);
                let fm = 0.5 * (fa + fb);
                gg += len / 6.0 * (fa * fa + 4.0 * fm * fm + fb * fb);
            }
        }
    }
    (gg, uu)
}

#[test]
fn random_field_matches_per_cell_oracle() {
    let mesh = unit_square(1);
    assert_eq!(mesh.n_cells(), 8);
    let space = FeSpace::p1_system(mesh.clone());
    let a = assemble_g_matrix_full(&FoslsProblem::heat(1), &space).unwrap();
    let k = fosls::fosls::GraphNormKernel { dim: 1 };
    let g = fosls::fem::assemble_matrix(&space, &space, Region::Cells, 4, &k, &k).unwrap();
    let mut rng = common::rng(7);
    for _ in 0..5 {
        let u = common::random_vec(&mut rng, space.n_dofs());
        let ns = space.n_scalar();
        let (gg, uu) = oracle_norms(&mesh, &u[..ns], &u[ns..]);
        assert!((quad_form(&a, &u) - gg).abs() <= 1e-12 * gg);
        assert!((quad_form(&g, &u) - uu).abs() <= 1e-12 * uu);
    }
}

#[test]
fn system_is_symmetric_and_definite() {
    for problem in [
        heat_manufactured(),
        FoslsProblem::constant(1, 0.7, &[0.4], 0.9).with_source(ScalarField::constant(1.0)),
    ] {
        let space = FeSpace::p1_system(unit_square(3));
        let sys = assemble_fosls(&problem, &space).unwrap();
        assert!(sys.matrix.asymmetry() <= 1e-13 * sys.matrix.max_abs());
        assert!(cholesky().factor(&sys.matrix).is_ok());
        let gram = assemble_u_gram(&space).unwrap();
        assert!(gram.asymmetry() <= 1e-13 * gram.max_abs());
        assert!(cholesky().factor(&gram).is_ok());
    }
    let space = FeSpace::p1_system(build_unit_cylinder_mesh(2, "control-init").unwrap().refine_uniform().unwrap().into());
    let sys = assemble_fosls(&FoslsProblem::heat(2), &space).unwrap();
    assert!(sys.matrix.asymmetry() <= 1e-13 * sys.matrix.max_abs());
    assert!(cholesky().factor(&sys.matrix).is_ok());
}

#[test]
fn invalid_coefficients_are_rejected() {
    let space = FeSpace::p1_system(unit_square(1));
    let bad = FoslsProblem::constant(1, -1.0, &[0.0], 0.0);
    assert!(matches!(assemble_fosls(&bad, &space), Err(FoslsError::InvalidCoefficient(_))));
    let mut nan = FoslsProblem::heat(1);
    nan.reaction = ScalarField::constant(f64::NAN);
    assert!(matches!(assemble_fosls(&nan, &space), Err(FoslsError::InvalidCoefficient(_))));
    let space2 = FeSpace::p1_system(build_unit_cylinder_mesh(2, "control-init").unwrap().into());
    let mut asym = FoslsProblem::heat(2);
    asym.diffusion[1] = ScalarField::constant(0.5);
    assert!(assemble_fosls(&asym, &space2).is_err());
    assert!(assemble_fosls(&FoslsProblem::heat(2), &space).is_err());
}

#[test]
fn consistency_and_zero_data() {
    let space = FeSpace::p1_system(unit_square(3));
    let heat = FoslsProblem::heat(1);
    let full = assemble_g_matrix_full(&heat, &space).unwrap();
    let free = space.free_dofs();
    let a = full.submatrix(free, free);
    let mut rng = common::rng(3);
    let v = common::random_vec(&mut rng, space.n_free());
    // f = Gv with v discrete, so the load is A v
    let sys = FoslsSystem {
        rhs: a.mul_vec(&v),
        matrix: a,
    };
    let u = solve_system(&sys, &space, cholesky().as_ref()).unwrap();
    let vf = space.expand(&v);
    let err = u.coeffs.iter().zip(&vf).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(err < 1e-9, "{err}");

    let zero = solve_fosls(&heat, &space, cholesky().as_ref()).unwrap();
    assert!(zero.coeffs.iter().all(|&x| x == 0.0));
    assert_eq!(residual_estimator(&heat, &space, &zero.coeffs), 0.0);
}

#[test]
fn estimator_vanishes_for_attained_data() {
    let mesh = unit_square(3);
    let space = FeSpace::p1_system(mesh.clone());
    let mut rng = common::rng(11);
    let v = space.expand(&common::random_vec(&mut rng, space.n_free()));
    let heat = FoslsProblem::heat(1);
    let sys = assemble_fosls(&heat, &space).unwrap();
    let ell = sys.matrix.mul_vec(&space.restrict(&v));
    let u = solve_system(&FoslsSystem { rhs: ell, ..sys }, &space, cholesky().as_ref()).unwrap();
    let est = integrate_fe_multi(
        &[(&space, &u.coeffs), (&space, &v)],
        Region::Cells,
        ERROR_DEGREE,
        |p, vals| {
            let (mut a, mut b) = ([0.0; 2], [0.0; 2]);
            heat.apply_g(p, &vals[0], &mut a);
            heat.apply_g(p, &vals[1], &mut b);
            (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
        },
    );
    assert!(est.sqrt() < 1e-9);
}

#[test]
fn galerkin_orthogonality_and_estimator_identity() {
    let problem = heat_manufactured();
    let space = FeSpace::p1_system(unit_square(4));
    let sol = solve_fosls(&problem, &space, cholesky().as_ref()).unwrap();
    assert!(sol.algebraic_residual <= 1e-10);
    let deg = fosls::fosls::assembly_degree(&space);

    let mut rng = common::rng(5);
    let f_norm2 = integrate_fe(&space, &sol.coeffs, Region::Cells, ERROR_DEGREE, |p, _| {
        let mut f = [0.0; 2];
        problem.data(p, &mut f);
        f[0] * f[0] + f[1] * f[1]
    }) + integrate_fe(&space, &sol.coeffs, Region::Facets(BoundaryTag::Initial), ERROR_DEGREE, |p, _| {
        problem.u0.eval(p).powi(2)
    });
    for _ in 0..3 {
        let v = space.expand(&common::random_vec(&mut rng, space.n_free()));
        let pairs = [(&space, &sol.coeffs[..]), (&space, &v[..])];
        let pairing = |q: usize, w: usize| {
            integrate_fe_multi(&pairs, Region::Cells, deg, |p, vals| {
                let (mut gu, mut gv, mut f) = ([0.0; 2], [0.0; 2], [0.0; 2]);
                problem.apply_g(p, &vals[0], &mut gu);
                problem.apply_g(p, &vals[1], &mut gv);
                problem.data(p, &mut f);
                let left = [f[0] * q as f64 - gu[0], f[1] * q as f64 - gu[1]];
                let right = if w == 1 { gv } else { gu };
                left[0] * right[0] + left[1] * right[1]
            }) + integrate_fe_multi(&pairs, Region::Facets(BoundaryTag::Initial), deg, |p, vals| {
                (problem.u0.eval(p) * q as f64 - vals[0].value(0)) * if w == 1 { vals[1].value(0) } else { vals[0].value(0) }
            })
        };
        let orth = pairing(1, 1);
        let gv = integrate_fe(&space, &v, Region::Cells, deg, |p, val| {
            let mut g = [0.0; 2];
            problem.apply_g(p, val, &mut g);
            g[0] * g[0] + g[1] * g[1]
        });
        assert!(orth.abs() <= 1e-9 * (f_norm2 * gv).sqrt(), "{orth}");
    }

    let est = residual_estimator(&problem, &space, &sol.coeffs);
    let f_gu = integrate_fe(&space, &sol.coeffs, Region::Cells, ERROR_DEGREE, |p, val| {
        let (mut g, mut f) = ([0.0; 2], [0.0; 2]);
        problem.apply_g(p, val, &mut g);
        problem.data(p, &mut f);
        f[0] * g[0] + f[1] * g[1]
    }) + integrate_fe(&space, &sol.coeffs, Region::Facets(BoundaryTag::Initial), ERROR_DEGREE, |p, val| {
        problem.u0.eval(p) * val.value(0)
    });
    let full = assemble_g_matrix_full(&problem, &space).unwrap();
    let a_uu = full.bilinear(&sol.coeffs, &sol.coeffs);
    let identity = f_norm2 - 2.0 * f_gu + a_uu;
    assert!((est * est - identity).abs() <= 1e-9 * est * est, "{} vs {identity}", est * est);
}

fn exact_gu_error(space: &FeSpace, coeffs: &[f64]) -> f64 {
    // u = sin(πx)cos(πt), u₂ = −∂ₓu
    let q = integrate_fe(space, coeffs, Region::Cells, ERROR_DEGREE, |p, v| {
        let (t, x) = (p[0], p[1]);
        let u_t = -PI * (PI * t).sin() * (PI * x).sin();
        let u_xx = -PI * PI * (PI * t).cos() * (PI * x).sin();
        let u_x = PI * (PI * t).cos() * (PI * x).cos();
        let g1 = u_t - u_xx - v.divergence();
        let g2 = -(-u_x) - u_x - (-v.value(1) - v.grad(0)[1]);
        g1 * g1 + g2 * g2
    });
    let i = integrate_fe(space, coeffs, Region::Facets(BoundaryTag::Initial), ERROR_DEGREE, |p, v| {
        ((PI * p[1]).sin() - v.value(0)).powi(2)
    });
    (q + i).sqrt()
}

#[test]
fn manufactured_heat_convergence() {
    let problem = heat_manufactured();
    let mut previous = f64::INFINITY;
    let mut ests = Vec::new();
    let mut dofs = Vec::new();
    for level in 1..=5 {
        let space = FeSpace::p1_system(unit_square(level));
        let sol = solve_fosls(&problem, &space, cholesky().as_ref()).unwrap();
        let est = residual_estimator(&problem, &space, &sol.coeffs);
        assert!(est < previous, "level {level}: {est} !< {previous}");
        previous = est;
        let exact = exact_gu_error(&space, &sol.coeffs);
        assert!((est - exact).abs() <= 1e-8 * exact, "{est} vs {exact}");

        let u = ScalarField::new(|p| (PI * p[0]).cos() * (PI * p[1]).sin());
        let u2 = ScalarField::new(|p| -PI * (PI * p[0]).cos() * (PI * p[1]).cos());
        let w = space.interpolate(&[u, u2]);
        assert!(est <= residual_estimator(&problem, &space, &w) + 1e-9);
        ests.push(est);
        dofs.push(space.n_free() as f64);
    }
    let slope = common::loglog_slope(&dofs[2..], &ests[2..]);
    assert!((slope + 0.5).abs() < 0.1, "slope {slope}");
}

#[test]
fn cg_and_cholesky_agree() {
    let problem = heat_manufactured();
    let space = FeSpace::p1_system(unit_square(3));
    let a = solve_fosls(&problem, &space, cholesky().as_ref()).unwrap();
    let b = solve_fosls(&problem, &space, spd_solvers().create("cg").unwrap().as_ref()).unwrap();
    let diff = a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-8, "{diff}");
}
