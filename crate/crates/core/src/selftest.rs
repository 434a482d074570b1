//! Property checks run by the `selftest` experiment. Each check reports a
//! measured deviation and the tolerance it has to meet.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fem::{build_space, integrate_fe, Discretization, FeSpace, Region, ScalarField, ERROR_DEGREE};
use crate::fosls::{
    assemble_fosls, assemble_g_load_full, assemble_g_matrix_full, residual_estimator, solve_system, FoslsError,
    FoslsProblem,
};
use crate::linalg::{dot, spd_solvers};
use crate::mesh::{build_moving_domain_mesh, build_unit_cylinder_mesh, BoundaryTag, SpaceTimeMesh, TensorGrid};
use crate::moving_domain::{verify_piola_identities, DeformationMap};
use crate::optimal_control::{assemble_control_system, build_manufactured_case, control_spaces};
use crate::reduced_basis::{benchmark_problem, benchmark_truth_space, expand_forms, greedy_offline, GreedyOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
        }
    }

    pub fn passed(&self) -> bool {
        self.value.is_finite() && self.value <= self.tolerance
    }
}

/// Runs every suite with random samples drawn from `seed`.
pub fn run_all(seed: u64) -> Result<Vec<Check>, FoslsError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = mesh_volume()?;
    out.extend(partition_of_unity(&mut rng)?);
    out.extend(fosls_symmetry()?);
    out.extend(galerkin_and_estimator(&mut rng)?);
    out.extend(control_symmetry()?);
    out.extend(reduced_basis_estimator(&mut rng)?);
    out.extend(piola(&mut rng));
    Ok(out)
}

fn initial_meshes() -> Result<Vec<(&'static str, SpaceTimeMesh, usize)>, FoslsError> {
    Ok(vec![
        ("cylinder 1+1", build_unit_cylinder_mesh(1, "control-init")?, 4),
        ("cylinder 2+1", build_unit_cylinder_mesh(2, "control-init")?, 2),
        ("moving 1+1", build_moving_domain_mesh(1)?, 4),
        ("moving 2+1", build_moving_domain_mesh(2)?, 2),
    ])
}

fn mesh_volume() -> Result<Vec<Check>, FoslsError> {
    let mut out = Vec::new();
    for (name, mut mesh, levels) in initial_meshes()? {
        let vol = mesh.total_volume();
        let mut dev = 0.0_f64;
        for _ in 0..levels {
            mesh = mesh.refine_uniform()?;
            dev = dev.max((mesh.total_volume() - vol).abs() / vol);
        }
        out.push(Check::new(format!("mesh volume conservation, {name}"), dev, 1e-12));
    }
    Ok(out)
}

fn unity_deviation(space: &FeSpace, points: &[Vec<f64>], with_gradient: bool) -> Result<f64, FoslsError> {
    let ones = vec![1.0; space.n_dofs()];
    let vals = space.evaluate(&ones, points)?;
    Ok(vals.iter().fold(0.0_f64, |m, v| {
        let g = if with_gradient { v.grad(0).iter().fold(0.0_f64, |a, x| a.max(x.abs())) } else { 0.0 };
        m.max((v.value(0) - 1.0).abs()).max(g)
    }))
}

fn partition_of_unity(rng: &mut ChaCha8Rng) -> Result<Vec<Check>, FoslsError> {
    let mut out = Vec::new();
    for (name, mesh, levels) in initial_meshes()? {
        let mesh = Arc::new(mesh.refine_uniform_times(levels.min(2))?);
        let d = mesh.dim();
        let map = if name.starts_with("moving") { DeformationMap::pinched(d) } else { DeformationMap::identity(d) };
        let points: Vec<Vec<f64>> = (0..100)
            .map(|_| map.forward(&(0..=d).map(|_| rng.random_range(0.0..1.0)).collect::<Vec<_>>()))
            .collect();
        let space = build_space(&Discretization::Simplicial(mesh), 1, 1, false)?;
        out.push(Check::new(format!("partition of unity, P1 {name}"), unity_deviation(&space, &points, true)?, 1e-13));
    }
    let grid = Arc::new(TensorGrid::uniform(0.3, (0.0, 1.0), 5, 7, 3)?);
    let space = build_space(&Discretization::Tensor(grid), 1, 3, false)?;
    let points: Vec<Vec<f64>> = (0..100).map(|_| vec![rng.random_range(0.0..0.3), rng.random_range(0.0..1.0)]).collect();
    out.push(Check::new("partition of unity, Q3", unity_deviation(&space, &points, false)?, 1e-13));
    Ok(out)
}

fn heat_case() -> FoslsProblem {
    FoslsProblem::heat(1)
        .with_source(ScalarField::new(|p| {
            (-PI * (PI * p[0]).sin() + PI * PI * (PI * p[0]).cos()) * (PI * p[1]).sin()
        }))
        .with_initial(ScalarField::new(|p| (PI * p[1]).sin()))
}

fn fosls_symmetry() -> Result<Vec<Check>, FoslsError> {
    let cases = [
        ("heat 1+1", FoslsProblem::heat(1), build_unit_cylinder_mesh(1, "control-init")?.refine_uniform_times(3)?),
        (
            "convection-reaction 1+1",
            FoslsProblem::constant(1, 0.7, &[1.3], 0.4),
            build_moving_domain_mesh(1)?.refine_uniform_times(2)?,
        ),
        ("heat 2+1", FoslsProblem::heat(2), build_unit_cylinder_mesh(2, "control-init")?.refine_uniform()?),
    ];
    let mut out = Vec::new();
    for (name, problem, mesh) in cases {
        let space = FeSpace::p1_system(Arc::new(mesh));
        let sys = assemble_fosls(&problem, &space)?;
        out.push(Check::new(
            format!("FOSLS matrix symmetry, {name}"),
            sys.matrix.asymmetry() / sys.matrix.max_abs(),
            1e-13,
        ));
    }
    let space = benchmark_truth_space(8)?;
    let problem = benchmark_problem();
    let sys = assemble_fosls(&problem.at(&[1.0, 0.5, 0.5]), &space)?;
    out.push(Check::new("FOSLS matrix symmetry, Q3", sys.matrix.asymmetry() / sys.matrix.max_abs(), 1e-13));
    Ok(out)
}

fn galerkin_and_estimator(rng: &mut ChaCha8Rng) -> Result<Vec<Check>, FoslsError> {
    let problem = heat_case();
    let mesh = Arc::new(build_unit_cylinder_mesh(1, "control-init")?.refine_uniform_times(4)?);
    let space = FeSpace::p1_system(mesh);
    let cholesky = spd_solvers().create("cholesky").expect("registered");
    let sys = assemble_fosls(&problem, &space)?;
    let sol = solve_system(&sys, &space, cholesky.as_ref())?;
    let full = assemble_g_matrix_full(&problem, &space)?;

    let f_norm2 = integrate_fe(&space, &sol.coeffs, Region::Cells, ERROR_DEGREE, |p, _| {
        let mut f = [0.0; 2];
        problem.data(p, &mut f);
        f[0] * f[0] + f[1] * f[1]
    }) + integrate_fe(&space, &sol.coeffs, Region::Facets(BoundaryTag::Initial), ERROR_DEGREE, |p, _| {
        problem.u0.eval(p).powi(2)
    });

    let residual: Vec<f64> = {
        let au = full.mul_vec(&sol.coeffs);
        let l = assemble_g_load_full(&problem, &space);
        space.restrict(&au.iter().zip(&l).map(|(a, b)| a - b).collect::<Vec<_>>())
    };
    let mut orth = 0.0_f64;
    for _ in 0..5 {
        let v: Vec<f64> = (0..space.n_free()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let gv = sys.matrix.bilinear(&v, &v);
        orth = orth.max(dot(&residual, &v).abs() / (f_norm2 * gv).sqrt());
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
    let identity = f_norm2 - 2.0 * f_gu + full.bilinear(&sol.coeffs, &sol.coeffs);
    Ok(vec![
        Check::new("Galerkin orthogonality, heat 1+1", orth, 1e-9),
        Check::new("FOSLS estimator identity, heat 1+1", (est * est - identity).abs() / (est * est), 1e-9),
    ])
}

fn control_symmetry() -> Result<Vec<Check>, FoslsError> {
    let case = build_manufactured_case(1, 0.01).expect("one space dimension is supported");
    let mesh = Arc::new(build_unit_cylinder_mesh(1, "control-init")?.refine_uniform_times(2)?);
    let (u, z) = control_spaces(mesh);
    let k = assemble_control_system(&case.problem, &u, &z)?.blocks.assemble();
    Ok(vec![Check::new("control saddle matrix symmetry", k.asymmetry() / k.max_abs(), 1e-13)])
}

fn reduced_basis_estimator(rng: &mut ChaCha8Rng) -> Result<Vec<Check>, FoslsError> {
    let problem = benchmark_problem();
    let space = benchmark_truth_space(16)?;
    let forms = expand_forms(&problem, &space)?;
    let options = GreedyOptions {
        tolerance: 1e-2,
        ..Default::default()
    };
    let cholesky = spd_solvers().create("cholesky").expect("registered");
    let model = greedy_offline(&forms, &space, problem.domain.clone(), &problem.domain.grid(5), &options, cholesky.as_ref())?;
    let mut dev = 0.0_f64;
    for _ in 0..5 {
        let mu = vec![rng.random_range(0.5..1.5), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
        let online = model.online_solve(&mu)?;
        let full = space.expand(&model.reconstruct(&online.coeffs));
        let quad = residual_estimator(&problem.at(&mu), &space, &full);
        dev = dev.max((online.estimator.powi(2) - quad * quad).abs() / (quad * quad));
    }
    Ok(vec![Check::new("reduced-basis estimator identity", dev, 1e-6)])
}

fn piola(rng: &mut ChaCha8Rng) -> Vec<Check> {
    let fields_1d: [(&str, Box<dyn Fn(&[f64]) -> Vec<f64> + Sync>); 3] = [
        ("constant", Box::new(|_: &[f64]| vec![1.0, 0.0])),
        ("linear", Box::new(|p: &[f64]| vec![p[0], p[1]])),
        ("quadratic", Box::new(|p: &[f64]| vec![p[0] * p[1], p[1] * p[1] - p[0]])),
    ];
    let fields_2d: [(&str, Box<dyn Fn(&[f64]) -> Vec<f64> + Sync>); 3] = [
        ("constant", Box::new(|_: &[f64]| vec![1.0, 0.5, -0.25])),
        ("linear", Box::new(|p: &[f64]| vec![p[0], p[1] - p[2], p[2]])),
        (
            "quadratic",
            Box::new(|p: &[f64]| vec![p[0] * p[1] + p[2] * p[2], p[1] * p[1] - p[0], p[0] * p[2] + 1.0]),
        ),
    ];
    let mut out = Vec::new();
    for (d, fields) in [(1, &fields_1d), (2, &fields_2d)] {
        let map = DeformationMap::pinched(d);
        let points: Vec<Vec<f64>> = (0..100)
            .map(|_| {
                let t = if rng.random_bool(0.5) { rng.random_range(0.0..0.499) } else { rng.random_range(0.501..1.0) };
                std::iter::once(t).chain((0..d).map(|_| rng.random_range(0.0..1.0))).collect()
            })
            .collect();
        for (name, field) in fields.iter() {
            let rep = verify_piola_identities(&map, field.as_ref(), &points, 1e-5);
            let worst = rep.divergence.max(rep.components).max(rep.gradient);
            out.push(Check::new(format!("Piola identities, {name} field, {d}+1"), worst, 1e-6));
        }
    }
    out
}
