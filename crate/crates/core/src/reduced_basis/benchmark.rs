use std::f64::consts::PI;
use std::sync::Arc;

use super::separable::{Monomial, ParameterDomain, SeparableParabolicProblem};
use crate::fem::{FeSpace, ScalarField};
use crate::mesh::{MeshError, TensorGrid};

pub const BENCHMARK_END_TIME: f64 = 0.3;

/// `μ` at which the benchmark data are attained by [`benchmark_exact`].
pub const BENCHMARK_REFERENCE: [f64; 3] = [1.0, 0.5, 0.5];

/// `u = sin(2πx)cos(4πt)`
pub fn benchmark_exact(p: &[f64]) -> f64 {
    (2.0 * PI * p[1]).sin() * (4.0 * PI * p[0]).cos()
}

/// `∂ₜu − μ₁∂ₓₓu + μ₂∂ₓu + μ₃u = f₁` on `(0, 0.3) × (0, 1)` with
/// `𝒫 = [0.5, 1.5] × [0, 1]²` and data fixed so that `μ = (1, ½, ½)`
/// reproduces [`benchmark_exact`]. The QoI is the mean of `u₁` over `Q`.
pub fn benchmark_problem() -> SeparableParabolicProblem {
    let np = 3;
    let f1 = ScalarField::new(|p| {
        let (t, x) = (p[0], p[1]);
        (2.0 * PI * x).sin() * ((4.0 * PI * PI + 0.5) * (4.0 * PI * t).cos() - 4.0 * PI * (4.0 * PI * t).sin())
            + PI * (2.0 * PI * x).cos() * (4.0 * PI * t).cos()
    });
    SeparableParabolicProblem {
        dim: 1,
        domain: ParameterDomain::new(vec![0.5, 0.0, 0.0], vec![1.5, 1.0, 1.0]),
        diffusion: vec![(Monomial::param(np, 0), vec![ScalarField::constant(1.0)])],
        convection: vec![(Monomial::param(np, 1), vec![ScalarField::constant(1.0)])],
        reaction: vec![(Monomial::param(np, 2), ScalarField::constant(1.0))],
        f1: vec![(Monomial::one(np), f1)],
        f2: Vec::new(),
        u0: vec![(Monomial::one(np), ScalarField::new(|p| (2.0 * PI * p[1]).sin()))],
        qoi: vec![(Monomial::one(np), ScalarField::constant(1.0 / BENCHMARK_END_TIME))],
    }
}

/// Two-component Q3 space on an `n × n` grid of `(0, 0.3) × (0, 1)`.
pub fn benchmark_truth_space(n: usize) -> Result<FeSpace, MeshError> {
    let grid = TensorGrid::uniform(BENCHMARK_END_TIME, (0.0, 1.0), n, n, 3)?;
    Ok(FeSpace::q3_system(Arc::new(grid)))
}
