use std::f64::consts::PI;

/// Reference-element quadrature: points in reference coordinates, positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
    exactness: usize,
}

impl QuadratureRule {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, q: usize) -> &[f64] {
        &self.points[q * self.dim..(q + 1) * self.dim]
    }

    pub fn weight(&self, q: usize) -> f64 {
        self.weights[q]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn exactness(&self) -> usize {
        self.exactness
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.points.chunks_exact(self.dim.max(1)).zip(self.weights.iter().copied())
    }

    /// Gauss–Legendre rule on `[0, 1]` with `m` points.
    pub fn gauss_interval(m: usize) -> Self {
        let (x, w) = gauss_legendre(m);
        Self {
            dim: 1,
            points: x,
            weights: w,
            exactness: 2 * m - 1,
        }
    }

    /// Tensor Gauss rule with `m` points per direction on `[0, 1]^dim`.
    pub fn gauss_box(dim: usize, m: usize) -> Self {
        let (x, w) = gauss_legendre(m);
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let total = m.pow(dim as u32);
        for idx in 0..total {
            let mut r = idx;
            let mut wt = 1.0;
            let mut p = Vec::with_capacity(dim);
            for _ in 0..dim {
                let k = r % m;
                r /= m;
                p.push(x[k]);
                wt *= w[k];
            }
            p.reverse();
            points.extend(p);
            weights.push(wt);
        }
        Self {
            dim,
            points,
            weights,
            exactness: 2 * m - 1,
        }
    }

    /// Collapsed (Duffy) Gauss rule on the reference simplex
    /// `{ξ ≥ 0, Σξ ≤ 1}` exact for polynomials of total degree `degree`.
    pub fn simplex(dim: usize, degree: usize) -> Self {
        assert!((1..=3).contains(&dim), "simplex rules for dimension 1..=3");
        let m = (degree + dim).div_ceil(2).max(1);
        let (x, w) = gauss_legendre(m);
        let total = m.pow(dim as u32);
        let mut points = Vec::with_capacity(total * dim);
        let mut weights = Vec::with_capacity(total);
        for idx in 0..total {
            let mut u = [0.0; 3];
            let mut wt = 1.0;
            let mut r = idx;
            for k in (0..dim).rev() {
                let j = r % m;
                r /= m;
                u[k] = x[j];
                wt *= w[j];
            }
            let mut scale = 1.0;
            for k in 0..dim {
                points.push(u[k] * scale);
                if k + 1 < dim {
                    wt *= (1.0 - u[k]).powi((dim - 1 - k) as i32);
                }
                scale *= 1.0 - u[k];
            }
            weights.push(wt);
        }
        Self {
            dim,
            points,
            weights,
            exactness: degree,
        }
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]`, by Newton iteration on `P_m`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(m, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(m, z);
        if d != 0.0 {
            dp = d;
        }
        let wt = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = 0.5 * (1.0 - z);
        x[m - 1 - i] = 0.5 * (1.0 + z);
        w[i] = 0.5 * wt;
        w[m - 1 - i] = 0.5 * wt;
    }
    (x, w)
}

fn legendre(m: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    #[test]
    fn simplex_monomials() {
        // ∫ ξ^α over the unit simplex = α! / (|α| + n)!
        for dim in 1..=3 {
            for deg in 0..=8 {
                let rule = QuadratureRule::simplex(dim, deg);
                assert!(rule.weights().iter().all(|&w| w > 0.0));
                for a in 0..=deg {
                    for b in 0..=(deg - a) {
                        for c in 0..=(deg - a - b) {
                            let alpha = [a, b, c];
                            if alpha[dim..].iter().any(|&e| e > 0) {
                                continue;
                            }
                            let exact = alpha[..dim].iter().map(|&e| factorial(e)).product::<f64>()
                                / factorial(alpha[..dim].iter().sum::<usize>() + dim);
                            let got: f64 = rule
                                .iter()
                                .map(|(p, w)| w * (0..dim).map(|k| p[k].powi(alpha[k] as i32)).product::<f64>())
                                .sum();
                            assert!((got - exact).abs() <= 1e-13 * exact, "dim {dim} deg {deg} {alpha:?}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn gauss_box_weights() {
        let r = QuadratureRule::gauss_box(2, 6);
        assert_eq!(r.len(), 36);
        assert!((r.weights().iter().sum::<f64>() - 1.0).abs() < 1e-14);
        let got: f64 = r.iter().map(|(p, w)| w * p[0].powi(11) * p[1].powi(5)).sum();
        assert!((got - 1.0 / 72.0).abs() < 1e-15);
    }
}
