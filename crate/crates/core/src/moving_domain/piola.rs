use super::DeformationMap;
use crate::linalg::{dense_solve, DenseMatrix};

/// Vector field `u = (u₁, u₂)` of `(t, x)` with `d+1` components.
pub type VectorField<'a> = &'a (dyn Fn(&[f64]) -> Vec<f64> + Sync);

/// Largest relative deviations of the Piola identities over the samples.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PiolaReport {
    /// `div û = det Dκ (div u)∘κ`
    pub divergence: f64,
    /// `u₁∘κ = û₁/det Dκ` and `u₂∘κ = (D_x̂κ′ û₂ + û₁ ∂ₜκ′)/det Dκ`
    pub components: f64,
    /// `∇ₓu₁∘κ = det⁻¹ (D_x̂κ′)^{−⊤}[∇_x̂ û₁ − det⁻¹ û₁ ∇_x̂ det]`
    pub gradient: f64,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// `û(p̂) = det Dκ (Dκ)⁻¹ u(κ(p̂))`
fn pullback(map: &DeformationMap, u: VectorField, p: &[f64]) -> Vec<f64> {
    let n = map.dim() + 1;
    let j = DenseMatrix::from_row_major(n, n, map.jacobian(p));
    let det = map.det(p);
    let v = u(&map.forward(p));
    dense_solve(&j, &v)
        .expect("Dκ is invertible")
        .into_iter()
        .map(|x| det * x)
        .collect()
}

fn central(f: impl Fn(&[f64]) -> f64, p: &[f64], k: usize, h: f64) -> f64 {
    let mut q = p.to_vec();
    q[k] = p[k] + h;
    let a = f(&q);
    q[k] = p[k] - h;
    let b = f(&q);
    (a - b) / (2.0 * h)
}

/// Checks the Piola identities at reference points `p̂ = (t, x̂)` with central
/// differences of step `h`. Points must keep their stencils on one side of
/// any kink of `κ`.
pub fn verify_piola_identities(map: &DeformationMap, u: VectorField, points: &[Vec<f64>], h: f64) -> PiolaReport {
    let d = map.dim();
    let n = d + 1;
    let mut rep = PiolaReport::default();
    for p in points {
        let x = map.forward(p);
        let det = map.det(p);
        let div_hat: f64 = (0..n).map(|k| central(|q| pullback(map, u, q)[k], p, k, h)).sum();
        let div_u: f64 = (0..n).map(|k| central(|q| u(q)[k], &x, k, h)).sum();
        rep.divergence = rep.divergence.max(rel(div_hat, det * div_u));

        let uh = pullback(map, u, p);
        let ux = u(&x);
        let sj = map.spatial_jacobian(p);
        let dt = map.time_derivative(p);
        let mut dev = rel(uh[0] / det, ux[0]);
        for r in 0..d {
            let v: f64 = (0..d).map(|c| sj[r * d + c] * uh[1 + c]).sum::<f64>() + uh[0] * dt[r];
            dev = dev.max(rel(v / det, ux[1 + r]));
        }
        rep.components = rep.components.max(dev);

        let grad_hat: Vec<f64> = (0..d).map(|k| central(|q| pullback(map, u, q)[0], p, 1 + k, h)).collect();
        let gdet = map.det_gradient(p);
        let rhs: Vec<f64> = (0..d).map(|k| grad_hat[k] - uh[0] * gdet[k] / det).collect();
        let st = DenseMatrix::from_fn(d, d, |i, j| sj[j * d + i]);
        let lhs = dense_solve(&st, &rhs).expect("D_x̂κ′ is invertible");
        for k in 0..d {
            let gx = central(|q| u(q)[0], &x, 1 + k, h);
            rep.gradient = rep.gradient.max(rel(lhs[k] / det, gx));
        }
    }
    rep
}
