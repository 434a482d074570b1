use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::separable::{Monomial, ParameterDomain, SeparableForms};
use crate::fem::FeSpace;
use crate::fosls::FoslsError;
use crate::linalg::{dense_solve, dot, DenseMatrix, LinalgError, SpdSolver};

/// Why the greedy loop returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    Tolerance,
    MaxBasis,
    /// Three consecutive iterations each reduced the maximum by less than 1%.
    Stagnation,
    /// Every training parameter was excluded.
    Exhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub chosen: Vec<Vec<f64>>,
    pub rejected: Vec<Vec<f64>>,
    /// Maximum training estimator for `N = 0, 1, …`.
    pub max_estimator: Vec<f64>,
    pub stop: Option<StopReason>,
}

/// How the online residual norm `‖f[μ] − G[μ]u^N‖_L` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimatorKind {
    /// `η² = Σθˢ − Σθˡ (l·c)`, loses about `ε‖f‖²/η²` in relative accuracy.
    Separable,
    /// `η = ‖R α(μ)‖` with `R` from a QR factorization of the residual
    /// pieces, accurate to about `ε‖f‖/η`.
    Stable,
}

impl EstimatorKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "separable" => Some(Self::Separable),
            "stable" => Some(Self::Stable),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Separable => "separable",
            Self::Stable => "stable",
        }
    }
}

/// Incremental Gram–Schmidt of the residual pieces, applied twice.
#[derive(Debug, Default)]
struct PieceQr {
    q: Vec<Vec<f64>>,
}

impl PieceQr {
    /// Returns the `R` column of `col`; extends `Q` unless `col` already lies
    /// in its span up to `1e−13` relative.
    fn push(&mut self, mut col: Vec<f64>) -> Vec<f64> {
        let norm0 = dot(&col, &col).sqrt();
        let mut r = vec![0.0; self.q.len()];
        for _ in 0..2 {
            for (k, q) in self.q.iter().enumerate() {
                let c = dot(q, &col);
                r[k] += c;
                col.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
            }
        }
        let nu = dot(&col, &col).sqrt();
        if nu > 1e-13 * norm0 {
            col.iter_mut().for_each(|a| *a /= nu);
            self.q.push(col);
            r.push(nu);
        }
        r
    }
}

/// Reduced model with a U-orthonormal basis of truth snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedModel {
    pub domain: ParameterDomain,
    pub n_truth: usize,
    pub theta_b: Vec<Monomial>,
    pub theta_l: Vec<Monomial>,
    pub theta_s: Vec<Monomial>,
    pub theta_f: Vec<Monomial>,
    pub scalars: Vec<f64>,
    /// Row-major `N×N` per bilinear term.
    pub reduced_b: Vec<Vec<f64>>,
    pub reduced_l: Vec<Vec<f64>>,
    pub reduced_f: Vec<Vec<f64>>,
    pub estimator: EstimatorKind,
    pub theta_data: Vec<Monomial>,
    pub theta_ops: Vec<Monomial>,
    /// `R` columns of the pieces `f_j` followed by `G_k vₙ` for `n = 0, 1, …`
    /// and every `k`.
    pub residual_r: Vec<Vec<f64>>,
    #[serde(skip)]
    pub basis: Vec<Vec<f64>>,
    pub history: TrainingHistory,
}

/// Result of an online query.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineResult {
    pub coeffs: Vec<f64>,
    pub estimator: f64,
    pub qoi: f64,
}

#[derive(Debug, Clone)]
pub struct GreedyOptions {
    pub tolerance: f64,
    pub max_basis: usize,
    pub estimator: EstimatorKind,
}

impl Default for GreedyOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-3,
            max_basis: 60,
            estimator: EstimatorKind::Stable,
        }
    }
}

impl ReducedModel {
    /// The `N = 0` model.
    pub fn empty(forms: &SeparableForms, domain: ParameterDomain, estimator: EstimatorKind) -> Self {
        Self {
            domain,
            n_truth: forms.gram.nrows(),
            theta_b: forms.bilinear.iter().map(|t| t.0.clone()).collect(),
            theta_l: forms.linear.iter().map(|t| t.0.clone()).collect(),
            theta_s: forms.scalar.iter().map(|t| t.0.clone()).collect(),
            theta_f: forms.qoi.iter().map(|t| t.0.clone()).collect(),
            scalars: forms.scalar.iter().map(|t| t.1).collect(),
            reduced_b: vec![Vec::new(); forms.bilinear.len()],
            reduced_l: vec![Vec::new(); forms.linear.len()],
            reduced_f: vec![Vec::new(); forms.qoi.len()],
            estimator,
            theta_data: forms.data_monomials(),
            theta_ops: forms.operator_monomials(),
            residual_r: Vec::new(),
            basis: Vec::new(),
            history: TrainingHistory {
                chosen: Vec::new(),
                rejected: Vec::new(),
                max_estimator: Vec::new(),
                stop: None,
            },
        }
    }

    pub fn n_basis(&self) -> usize {
        self.reduced_l.first().map_or(self.basis.len(), |l| l.len())
    }

    /// Reduced matrix `Σ θ_q^b(μ) B_q`.
    pub fn reduced_matrix(&self, mu: &[f64]) -> DenseMatrix {
        let n = self.n_basis();
        let mut a = DenseMatrix::zeros(n, n);
        for (m, b) in self.theta_b.iter().zip(&self.reduced_b) {
            a.add_scaled(m.eval(mu), &DenseMatrix::from_row_major(n, n, b.clone()));
        }
        a
    }

    pub fn online_solve(&self, mu: &[f64]) -> Result<OnlineResult, LinalgError> {
        let n = self.n_basis();
        let mut rhs = vec![0.0; n];
        for (m, l) in self.theta_l.iter().zip(&self.reduced_l) {
            let w = m.eval(mu);
            rhs.iter_mut().zip(l).for_each(|(r, x)| *r += w * x);
        }
        let coeffs = dense_solve(&self.reduced_matrix(mu), &rhs)?;
        let estimator = match self.estimator {
            EstimatorKind::Separable => self.separable_estimator(mu, &rhs, &coeffs),
            EstimatorKind::Stable => self.stable_estimator(mu, &coeffs),
        };
        let qoi = self
            .theta_f
            .iter()
            .zip(&self.reduced_f)
            .map(|(m, f)| m.eval(mu) * dot(f, &coeffs))
            .sum();
        Ok(OnlineResult { coeffs, estimator, qoi })
    }

    /// `√max(0, Σθˢ − Σθˡ (l·c))` with `rhs = Σθˡ l`.
    pub fn separable_estimator(&self, mu: &[f64], rhs: &[f64], coeffs: &[f64]) -> f64 {
        let s: f64 = self.theta_s.iter().zip(&self.scalars).map(|(m, s)| m.eval(mu) * s).sum();
        (s - dot(rhs, coeffs)).max(0.0).sqrt()
    }

    /// `‖Σ α_p R_p‖` with `α = (θ_j(μ), −θ_k(μ) cₙ)`.
    pub fn stable_estimator(&self, mu: &[f64], coeffs: &[f64]) -> f64 {
        let rank = self.residual_r.iter().map(Vec::len).max().unwrap_or(0);
        let mut y = vec![0.0; rank];
        let mut add = |w: f64, col: &[f64]| y.iter_mut().zip(col).for_each(|(a, b)| *a += w * b);
        let nd = self.theta_data.len();
        for (m, col) in self.theta_data.iter().zip(&self.residual_r) {
            add(m.eval(mu), col);
        }
        let theta: Vec<f64> = self.theta_ops.iter().map(|m| m.eval(mu)).collect();
        for (n, c) in coeffs.iter().enumerate() {
            for (k, t) in theta.iter().enumerate() {
                add(-t * c, &self.residual_r[nd + n * theta.len() + k]);
            }
        }
        dot(&y, &y).sqrt()
    }

    /// Truth coefficients (free dofs) of `Σ cᵢ vᵢ`.
    pub fn reconstruct(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_truth];
        for (c, v) in coeffs.iter().zip(&self.basis) {
            out.iter_mut().zip(v).for_each(|(o, x)| *o += c * x);
        }
        out
    }

    /// Appends a U-orthonormal vector and updates all reduced quantities.
    fn push_basis(&mut self, forms: &SeparableForms, v: Vec<f64>) {
        let n = self.n_basis();
        for (q, (_, b)) in forms.bilinear.iter().enumerate() {
            let bv = b.mul_vec(&v);
            let col: Vec<f64> = self.basis.iter().map(|w| dot(w, &bv)).collect();
            let diag = dot(&v, &bv);
            let old = &self.reduced_b[q];
            let mut next = vec![0.0; (n + 1) * (n + 1)];
            for i in 0..n {
                next[i * (n + 1)..i * (n + 1) + n].copy_from_slice(&old[i * n..(i + 1) * n]);
                next[i * (n + 1) + n] = col[i];
                next[n * (n + 1) + i] = col[i];
            }
            next[n * (n + 1) + n] = diag;
            self.reduced_b[q] = next;
        }
        for (q, (_, l)) in forms.linear.iter().enumerate() {
            self.reduced_l[q].push(dot(l, &v));
        }
        for (q, (_, f)) in forms.qoi.iter().enumerate() {
            self.reduced_f[q].push(dot(f, &v));
        }
        self.basis.push(v);
    }
}

/// Truth Galerkin solution at `μ` on the free dofs.
pub fn truth_solve(forms: &SeparableForms, mu: &[f64], solver: &dyn SpdSolver) -> Result<Vec<f64>, FoslsError> {
    let a = forms.matrix(mu);
    let rhs = forms.load(mu);
    let x = solver.solve(&a, &rhs)?;
    let res = crate::linalg::relative_residual(&a, &x, &rhs);
    if res > 1e-10 {
        return Err(FoslsError::Inaccurate { residual: res, tol: 1e-10 });
    }
    Ok(x)
}

/// Gram–Schmidt in the U inner product, applied twice. Returns `None` when
/// less than `1e−8` of the U-norm survives.
fn orthonormalize(forms: &SeparableForms, basis: &[Vec<f64>], gram_basis: &[Vec<f64>], mut u: Vec<f64>) -> Option<Vec<f64>> {
    let norm0 = forms.gram.bilinear(&u, &u).sqrt();
    if norm0 == 0.0 {
        return None;
    }
    for _ in 0..2 {
        for (v, xv) in basis.iter().zip(gram_basis) {
            let c = dot(xv, &u);
            u.iter_mut().zip(v).for_each(|(a, b)| *a -= c * b);
        }
    }
    let norm = forms.gram.bilinear(&u, &u).sqrt();
    if norm < 1e-8 * norm0 {
        return None;
    }
    u.iter_mut().for_each(|a| *a /= norm);
    Some(u)
}

fn estimators(model: &ReducedModel, train: &[Vec<f64>]) -> Result<Vec<f64>, LinalgError> {
    train.par_iter().map(|mu| model.online_solve(mu).map(|r| r.estimator)).collect()
}

/// Weak greedy over a finite training set.
pub fn greedy_offline(
    forms: &SeparableForms,
    space: &FeSpace,
    domain: ParameterDomain,
    train: &[Vec<f64>],
    options: &GreedyOptions,
    solver: &dyn SpdSolver,
) -> Result<ReducedModel, FoslsError> {
    let mut model = ReducedModel::empty(forms, domain, options.estimator);
    let mut qr = PieceQr::default();
    if options.estimator == EstimatorKind::Stable {
        for col in forms.sample_data(space) {
            model.residual_r.push(qr.push(col));
        }
    }
    let mut excluded = vec![false; train.len()];
    let mut gram_basis: Vec<Vec<f64>> = Vec::new();
    let mut slow = 0;
    loop {
        let est = estimators(&model, train)?;
        let mut best: Option<usize> = None;
        for (k, &e) in est.iter().enumerate() {
            if !excluded[k] && best.is_none_or(|b| e > est[b]) {
                best = Some(k);
            }
        }
        let max = est.iter().cloned().fold(0.0, f64::max);
        if let Some(&prev) = model.history.max_estimator.last() {
            slow = if max > 0.99 * prev { slow + 1 } else { 0 };
        }
        model.history.max_estimator.push(max);
        info!("greedy N = {}: max estimator {max:.6e}", model.n_basis());
        let stop = if max <= options.tolerance {
            Some(StopReason::Tolerance)
        } else if model.n_basis() >= options.max_basis {
            Some(StopReason::MaxBasis)
        } else if slow >= 3 {
            Some(StopReason::Stagnation)
        } else if best.is_none() {
            Some(StopReason::Exhausted)
        } else {
            None
        };
        if stop.is_some() {
            model.history.stop = stop;
            return Ok(model);
        }
        let k = best.expect("checked above");
        let mu = &train[k];
        excluded[k] = true;
        let snapshot = truth_solve(forms, mu, solver)?;
        match orthonormalize(forms, &model.basis, &gram_basis, snapshot) {
            Some(v) => {
                debug!("adding snapshot at {mu:?}");
                gram_basis.push(forms.gram.mul_vec(&v));
                if options.estimator == EstimatorKind::Stable {
                    for col in forms.sample_operators(space, &v) {
                        model.residual_r.push(qr.push(col));
                    }
                }
                model.push_basis(forms, v);
                model.history.chosen.push(mu.clone());
            }
            None => {
                debug!("rejecting dependent snapshot at {mu:?}");
                model.history.rejected.push(mu.clone());
            }
        }
    }
}

/// Truth solution at `μ` and its residual `‖f[μ] − G[μ]u^δ[μ]‖_L` by quadrature.
pub fn best_truth_error(
    forms: &SeparableForms,
    space: &FeSpace,
    mu: &[f64],
    solver: &dyn SpdSolver,
) -> Result<(Vec<f64>, f64), FoslsError> {
    let u = truth_solve(forms, mu, solver)?;
    let r = forms.residual_norm(space, mu, &u);
    Ok((u, r))
}
