use std::f64::consts::PI;

use super::ControlProblem;
use crate::fem::ScalarField;
use crate::fosls::FoslsProblem;

/// `u = cos(πt) S(x)`, `ℓ₁ = ϱ(1−t) S(x)` with `S(x) = ∏ sin(πxₖ)` on the unit
/// cube, `A = I`, `b = 0`, `c = 0`, tracking of `u₁` in `L₂(Q)`.
#[derive(Debug, Clone)]
pub struct ManufacturedControlCase {
    pub dim: usize,
    pub rho: f64,
    pub problem: ControlProblem,
    /// `u₁` with its gradient.
    pub u: ScalarField,
    /// `ℓ₁` with its gradient.
    pub ell1: ScalarField,
    /// `z = ℓ₁/ϱ`
    pub z: ScalarField,
    /// `f₁★ + z = ∂ₜu − Δₓu`
    pub state_source: ScalarField,
}

fn s(p: &[f64]) -> f64 {
    p[1..].iter().map(|x| (PI * x).sin()).product()
}

/// `∇ₓS`
fn grad_s(p: &[f64]) -> Vec<f64> {
    let d = p.len() - 1;
    (0..d)
        .map(|k| {
            (0..d)
                .map(|l| {
                    let x = p[1 + l];
                    if l == k {
                        PI * (PI * x).cos()
                    } else {
                        (PI * x).sin()
                    }
                })
                .product()
        })
        .collect()
}

impl ManufacturedControlCase {
    /// `J(u, z) = ½‖u − w★‖² + ϱ/2‖z‖² = 2^{−d}(ϱ²/2 (1 + dπ² + d²π⁴/3) + ϱ/6)`.
    pub fn exact_cost(&self) -> f64 {
        let (d, r) = (self.dim as f64, self.rho);
        0.5f64.powi(self.dim as i32) * (0.5 * r * r * (1.0 + d * PI * PI + d * d * PI.powi(4) / 3.0) + r / 6.0)
    }

    /// `−∇ₓℓ₁`
    pub fn ell2(&self, p: &[f64]) -> Vec<f64> {
        grad_s(p).iter().map(|g| -self.rho * (1.0 - p[0]) * g).collect()
    }

    /// `u₂ = −∇ₓu₁`
    pub fn u2(&self, p: &[f64]) -> Vec<f64> {
        grad_s(p).iter().map(|g| -(PI * p[0]).cos() * g).collect()
    }
}

pub fn build_manufactured_case(dim: usize, rho: f64) -> Option<ManufacturedControlCase> {
    if !(1..=2).contains(&dim) {
        return None;
    }
    let d = dim as f64;
    let lap = d * PI * PI;
    let u = ScalarField::new(|p| (PI * p[0]).cos() * s(p)).with_gradient(|p| {
        let mut g = vec![-PI * (PI * p[0]).sin() * s(p)];
        g.extend(grad_s(p).iter().map(|v| (PI * p[0]).cos() * v));
        g
    });
    let ell1 = ScalarField::new(move |p| rho * (1.0 - p[0]) * s(p)).with_gradient(move |p| {
        let mut g = vec![-rho * s(p)];
        g.extend(grad_s(p).iter().map(|v| rho * (1.0 - p[0]) * v));
        g
    });
    let z = ScalarField::new(|p| (1.0 - p[0]) * s(p));
    let state_source = ScalarField::new(move |p| (-PI * (PI * p[0]).sin() + lap * (PI * p[0]).cos()) * s(p));
    let f1 = ScalarField::new(move |p| (-PI * (PI * p[0]).sin() + lap * (PI * p[0]).cos()) * s(p) - (1.0 - p[0]) * s(p));
    let w1 = ScalarField::new(move |p| (PI * p[0]).cos() * s(p) + rho * s(p) + rho * lap * (1.0 - p[0]) * s(p));
    let state = FoslsProblem::heat(dim).with_source(f1).with_initial(ScalarField::new(s));
    Some(ManufacturedControlCase {
        dim,
        rho,
        problem: ControlProblem::tracking(state, w1, rho),
        u,
        ell1,
        z,
        state_source,
    })
}
