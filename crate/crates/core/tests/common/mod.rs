#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gauss–Legendre rule on `[a, b]` by the Golub–Welsch eigenvalue method.
pub fn golub_welsch(m: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let mut j = DMatrix::<f64>::zeros(m, m);
    for k in 1..m {
        let kf = k as f64;
        let beta = kf / (4.0 * kf * kf - 1.0).sqrt();
        j[(k, k - 1)] = beta;
        j[(k - 1, k)] = beta;
    }
    let eig = SymmetricEigen::new(j);
    let mut out: Vec<(f64, f64)> = (0..m)
        .map(|k| {
            let x = eig.eigenvalues[k];
            let v0 = eig.eigenvectors[(0, k)];
            (0.5 * (a + b) + 0.5 * (b - a) * x, (b - a) * v0 * v0)
        })
        .collect();
    out.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
    out
}

/// `∫∫ f(t, x)` over a rectangle with an `m × m` Gauss product rule.
pub fn gauss_2d(f: impl Fn(f64, f64) -> f64, t: (f64, f64), x: (f64, f64), m: usize) -> f64 {
    let gt = golub_welsch(m, t.0, t.1);
    let gx = golub_welsch(m, x.0, x.1);
    let mut s = 0.0;
    for &(tt, wt) in &gt {
        for &(xx, wx) in &gx {
            s += wt * wx * f(tt, xx);
        }
    }
    s
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
