use serde::{Deserialize, Serialize};

use crate::fem::{
    assemble_matrix, assemble_vector, integrate, sample_fe, FeSpace, FeValue, FormKernel, Region, ScalarField,
};
use crate::fosls::{assemble_u_gram, assembly_degree, FoslsError, FoslsProblem, TraceKernel};
use crate::linalg::CsrMatrix;
use crate::mesh::BoundaryTag;

/// Monomial `μ^α` in the parameters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Monomial(pub Vec<u32>);

impl Monomial {
    pub fn one(n_params: usize) -> Self {
        Self(vec![0; n_params])
    }

    /// `μᵢ`
    pub fn param(n_params: usize, i: usize) -> Self {
        let mut a = vec![0; n_params];
        a[i] = 1;
        Self(a)
    }

    pub fn eval(&self, mu: &[f64]) -> f64 {
        self.0.iter().zip(mu).map(|(&a, &m)| m.powi(a as i32)).product()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }
}

impl std::fmt::Display for Monomial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .enumerate()
            .filter(|(_, &a)| a > 0)
            .map(|(i, &a)| if a == 1 { format!("mu{}", i + 1) } else { format!("mu{}^{a}", i + 1) })
            .collect();
        if parts.is_empty() {
            write!(f, "1")
        } else {
            write!(f, "{}", parts.join("*"))
        }
    }
}

/// Box `∏[lowerᵢ, upperᵢ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ParameterDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len());
        assert!(lower.iter().zip(&upper).all(|(a, b)| a <= b));
        Self { lower, upper }
    }

    pub fn n_params(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, mu: &[f64]) -> bool {
        mu.len() == self.n_params() && mu.iter().enumerate().all(|(i, &m)| m >= self.lower[i] && m <= self.upper[i])
    }

    /// Tensor grid with `n` equispaced points per direction, last parameter
    /// varying fastest.
    pub fn grid(&self, n: usize) -> Vec<Vec<f64>> {
        let p = self.n_params();
        let total = n.pow(p as u32);
        (0..total)
            .map(|mut k| {
                let mut mu = vec![0.0; p];
                for i in (0..p).rev() {
                    let j = k % n;
                    k /= n;
                    mu[i] = if n == 1 {
                        0.5 * (self.lower[i] + self.upper[i])
                    } else {
                        let s = j as f64 / (n - 1) as f64;
                        (self.lower[i] * (1.0 - s) + self.upper[i] * s).clamp(self.lower[i], self.upper[i])
                    };
                }
                mu
            })
            .collect()
    }
}

/// Problem whose coefficients and data are sums `Σ θ_q(μ) · field_q`.
#[derive(Debug, Clone)]
pub struct SeparableParabolicProblem {
    pub dim: usize,
    pub domain: ParameterDomain,
    /// Row-major `d×d` diffusion terms.
    pub diffusion: Vec<(Monomial, Vec<ScalarField>)>,
    pub convection: Vec<(Monomial, Vec<ScalarField>)>,
    pub reaction: Vec<(Monomial, ScalarField)>,
    pub f1: Vec<(Monomial, ScalarField)>,
    pub f2: Vec<(Monomial, Vec<ScalarField>)>,
    pub u0: Vec<(Monomial, ScalarField)>,
    /// QoI terms `u ↦ ∫_Q w_q u₁`.
    pub qoi: Vec<(Monomial, ScalarField)>,
}

fn sum_field(terms: &[(Monomial, ScalarField)], mu: &[f64]) -> ScalarField {
    let parts: Vec<(f64, ScalarField)> = terms.iter().map(|(m, f)| (m.eval(mu), f.clone())).collect();
    ScalarField::new(move |p| parts.iter().map(|(w, f)| w * f.eval(p)).sum())
}

fn sum_vector(terms: &[(Monomial, Vec<ScalarField>)], mu: &[f64], len: usize) -> Vec<ScalarField> {
    (0..len)
        .map(|k| {
            let scalar: Vec<(Monomial, ScalarField)> = terms.iter().map(|(m, f)| (m.clone(), f[k].clone())).collect();
            sum_field(&scalar, mu)
        })
        .collect()
}

impl SeparableParabolicProblem {
    pub fn n_params(&self) -> usize {
        self.domain.n_params()
    }

    /// The parabolic problem at a fixed parameter.
    pub fn at(&self, mu: &[f64]) -> FoslsProblem {
        let d = self.dim;
        let mut p = FoslsProblem::heat(d);
        p.diffusion = sum_vector(&self.diffusion, mu, d * d);
        p.convection = sum_vector(&self.convection, mu, d);
        p.reaction = sum_field(&self.reaction, mu);
        p.f1 = sum_field(&self.f1, mu);
        p.f2 = sum_vector(&self.f2, mu, d);
        p.u0 = sum_field(&self.u0, mu);
        p
    }

    /// `F[μ](u) = Σ θ_q(μ) ∫_Q w_q u₁` as a field `Σ θ_q w_q`.
    pub fn qoi_weight(&self, mu: &[f64]) -> ScalarField {
        sum_field(&self.qoi, mu)
    }
}

/// Which parts of `L = L₂(Q) × L₂(Q)^d × L₂(Ω₀)` a term touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Support {
    scalar: bool,
    flux: bool,
    initial: bool,
}

impl Support {
    fn meets(self, o: Support) -> bool {
        (self.scalar && o.scalar) || (self.flux && o.flux) || (self.initial && o.initial)
    }
}

/// One summand `G_k` of `G[μ] = Σ θ_k(μ) G_k`.
#[derive(Debug, Clone)]
enum OperatorPiece {
    /// `(div u, −u₂, u₁(0))`
    Principal,
    /// `(0, −A_q∇ₓu₁, 0)`
    Diffusion(Vec<ScalarField>),
    /// `(b_q·∇ₓu₁, 0, 0)`
    Convection(Vec<ScalarField>),
    /// `(c_q u₁, 0, 0)`
    Reaction(ScalarField),
}

impl OperatorPiece {
    fn apply(&self, dim: usize, p: &[f64], u: &FeValue, out: &mut [f64]) {
        out.fill(0.0);
        let g = u.grad(0);
        match self {
            Self::Principal => {
                out[0] = u.divergence();
                for k in 0..dim {
                    out[1 + k] = -u.value(1 + k);
                }
            }
            Self::Diffusion(a) => {
                for k in 0..dim {
                    out[1 + k] = -(0..dim).map(|l| a[k * dim + l].eval(p) * g[1 + l]).sum::<f64>();
                }
            }
            Self::Convection(b) => out[0] = (0..dim).map(|k| b[k].eval(p) * g[1 + k]).sum(),
            Self::Reaction(c) => out[0] = c.eval(p) * u.value(0),
        }
    }

    fn support(&self) -> Support {
        match self {
            Self::Principal => Support { scalar: true, flux: true, initial: true },
            Self::Diffusion(_) => Support { scalar: false, flux: true, initial: false },
            Self::Convection(_) | Self::Reaction(_) => Support { scalar: true, flux: false, initial: false },
        }
    }
}

struct PieceKernel<'a> {
    dim: usize,
    piece: &'a OperatorPiece,
}

impl FormKernel for PieceKernel<'_> {
    fn width(&self) -> usize {
        self.dim + 1
    }
    fn features(&self, p: &[f64], comp: usize, v: f64, g: &[f64], out: &mut [f64]) {
        let d = self.dim;
        out.fill(0.0);
        match self.piece {
            OperatorPiece::Principal => {
                out[0] = g[comp];
                if comp > 0 {
                    out[comp] = -v;
                }
            }
            OperatorPiece::Diffusion(a) if comp == 0 => {
                for k in 0..d {
                    out[1 + k] = -(0..d).map(|l| a[k * d + l].eval(p) * g[1 + l]).sum::<f64>();
                }
            }
            OperatorPiece::Convection(b) if comp == 0 => {
                out[0] = (0..d).map(|k| b[k].eval(p) * g[1 + k]).sum();
            }
            OperatorPiece::Reaction(c) if comp == 0 => out[0] = c.eval(p) * v,
            _ => {}
        }
    }
}

/// One summand of the data `f[μ] = Σ θ_j(μ) f_j`.
#[derive(Debug, Clone)]
enum DataPiece {
    Source(ScalarField),
    Flux(Vec<ScalarField>),
    Initial(ScalarField),
}

impl DataPiece {
    fn support(&self) -> Support {
        match self {
            Self::Source(_) => Support { scalar: true, flux: false, initial: false },
            Self::Flux(_) => Support { scalar: false, flux: true, initial: false },
            Self::Initial(_) => Support { scalar: false, flux: false, initial: true },
        }
    }

    fn fill(&self, p: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        match self {
            Self::Source(f) => out[0] = f.eval(p),
            Self::Flux(f) => {
                for (k, fk) in f.iter().enumerate() {
                    out[1 + k] = fk.eval(p);
                }
            }
            Self::Initial(u) => out[0] = u.eval(p),
        }
    }
}

/// Parameter-separable expansion of `⟨G[μ]u, G[μ]v⟩_L`, `⟨f[μ], G[μ]v⟩_L`
/// and `‖f[μ]‖²_L`, with matrices and vectors on the free dofs.
#[derive(Debug, Clone)]
pub struct SeparableForms {
    pub bilinear: Vec<(Monomial, CsrMatrix)>,
    pub linear: Vec<(Monomial, Vec<f64>)>,
    pub scalar: Vec<(Monomial, f64)>,
    pub qoi: Vec<(Monomial, Vec<f64>)>,
    /// `⟨·,·⟩_U` on the free dofs.
    pub gram: CsrMatrix,
    ops: Vec<(Monomial, OperatorPiece)>,
    data: Vec<(Monomial, DataPiece)>,
    dim: usize,
    degree: usize,
}

fn merge<T>(terms: &mut Vec<(Monomial, T)>, key: Monomial, value: T, add: impl FnOnce(&mut T, T)) {
    match terms.iter_mut().find(|(m, _)| *m == key) {
        Some((_, existing)) => add(existing, value),
        None => terms.push((key, value)),
    }
}

pub fn expand_forms(problem: &SeparableParabolicProblem, space: &FeSpace) -> Result<SeparableForms, FoslsError> {
    let d = problem.dim;
    let np = problem.n_params();
    let deg = assembly_degree(space);
    let free = space.free_dofs();

    let mut ops: Vec<(Monomial, OperatorPiece)> = vec![(Monomial::one(np), OperatorPiece::Principal)];
    ops.extend(problem.diffusion.iter().map(|(m, a)| (m.clone(), OperatorPiece::Diffusion(a.clone()))));
    ops.extend(problem.convection.iter().map(|(m, b)| (m.clone(), OperatorPiece::Convection(b.clone()))));
    ops.extend(problem.reaction.iter().map(|(m, c)| (m.clone(), OperatorPiece::Reaction(c.clone()))));

    let mut data: Vec<(Monomial, DataPiece)> = Vec::new();
    data.extend(problem.f1.iter().map(|(m, f)| (m.clone(), DataPiece::Source(f.clone()))));
    data.extend(problem.f2.iter().map(|(m, f)| (m.clone(), DataPiece::Flux(f.clone()))));
    data.extend(problem.u0.iter().map(|(m, f)| (m.clone(), DataPiece::Initial(f.clone()))));

    let mut bilinear: Vec<(Monomial, CsrMatrix)> = Vec::new();
    for k in 0..ops.len() {
        for l in k..ops.len() {
            let (pk, pl) = (&ops[k].1, &ops[l].1);
            if !pk.support().meets(pl.support()) {
                continue;
            }
            let (kk, kl) = (PieceKernel { dim: d, piece: pk }, PieceKernel { dim: d, piece: pl });
            let mut m = assemble_matrix(space, space, Region::Cells, deg, &kl, &kk)?;
            if matches!((pk, pl), (OperatorPiece::Principal, OperatorPiece::Principal)) {
                let i = assemble_matrix(space, space, Region::Facets(BoundaryTag::Initial), deg, &TraceKernel, &TraceKernel)?;
                m = CsrMatrix::linear_combination(&[1.0, 1.0], &[&m, &i]);
            }
            if k != l {
                m = CsrMatrix::linear_combination(&[1.0, 1.0], &[&m, &m.transpose()]);
            }
            let m = m.submatrix(free, free);
            merge(&mut bilinear, ops[k].0.mul(&ops[l].0), m, |a, b| {
                *a = CsrMatrix::linear_combination(&[1.0, 1.0], &[a, &b])
            });
        }
    }

    let mut linear: Vec<(Monomial, Vec<f64>)> = Vec::new();
    for (mj, dj) in &data {
        for (mk, pk) in &ops {
            if !dj.support().meets(pk.support()) {
                continue;
            }
            let v = match dj {
                DataPiece::Initial(_) => {
                    assemble_vector(space, Region::Facets(BoundaryTag::Initial), deg, &TraceKernel, |p, out| {
                        dj.fill(p, out)
                    })
                }
                _ => assemble_vector(space, Region::Cells, deg, &PieceKernel { dim: d, piece: pk }, |p, out| {
                    dj.fill(p, out)
                }),
            };
            merge(&mut linear, mj.mul(mk), space.restrict(&v), |a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y)
            });
        }
    }

    let mut scalar: Vec<(Monomial, f64)> = Vec::new();
    for i in 0..data.len() {
        for j in i..data.len() {
            let (di, dj) = (&data[i].1, &data[j].1);
            if !di.support().meets(dj.support()) {
                continue;
            }
            let region = match di {
                DataPiece::Initial(_) => Region::Facets(BoundaryTag::Initial),
                _ => Region::Cells,
            };
            let ip = integrate(space, region, deg, |p| {
                let (mut a, mut b) = ([0.0; 3], [0.0; 3]);
                di.fill(p, &mut a[..d + 1]);
                dj.fill(p, &mut b[..d + 1]);
                a.iter().zip(&b).map(|(x, y)| x * y).sum()
            });
            let w = if i == j { 1.0 } else { 2.0 };
            merge(&mut scalar, data[i].0.mul(&data[j].0), w * ip, |a, b| *a += b);
        }
    }

    let mut qoi: Vec<(Monomial, Vec<f64>)> = Vec::new();
    for (m, w) in &problem.qoi {
        let v = assemble_vector(space, Region::Cells, deg, &TraceKernel, |p, out| out[0] = w.eval(p));
        merge(&mut qoi, m.clone(), space.restrict(&v), |a, b| a.iter_mut().zip(b).for_each(|(x, y)| *x += y));
    }

    Ok(SeparableForms {
        bilinear,
        linear,
        scalar,
        qoi,
        gram: assemble_u_gram(space)?,
        ops,
        data,
        dim: d,
        degree: deg,
    })
}

impl SeparableForms {
    pub fn n_params(&self) -> usize {
        self.bilinear[0].0 .0.len()
    }

    pub fn matrix(&self, mu: &[f64]) -> CsrMatrix {
        let coeffs: Vec<f64> = self.bilinear.iter().map(|(m, _)| m.eval(mu)).collect();
        let mats: Vec<&CsrMatrix> = self.bilinear.iter().map(|(_, a)| a).collect();
        CsrMatrix::linear_combination(&coeffs, &mats)
    }

    pub fn load(&self, mu: &[f64]) -> Vec<f64> {
        let n = self.gram.nrows();
        let mut out = vec![0.0; n];
        for (m, l) in &self.linear {
            let w = m.eval(mu);
            out.iter_mut().zip(l).for_each(|(o, x)| *o += w * x);
        }
        out
    }

    pub fn data_norm2(&self, mu: &[f64]) -> f64 {
        self.scalar.iter().map(|(m, s)| m.eval(mu) * s).sum()
    }

    pub fn qoi_vector(&self, mu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.gram.nrows()];
        for (m, f) in &self.qoi {
            let w = m.eval(mu);
            out.iter_mut().zip(f).for_each(|(o, x)| *o += w * x);
        }
        out
    }
}

impl SeparableForms {
    /// Monomials `θ_j` of the data pieces `f = Σ θ_j f_j`.
    pub fn data_monomials(&self) -> Vec<Monomial> {
        self.data.iter().map(|t| t.0.clone()).collect()
    }

    /// Monomials `θ_k` of the operator pieces `G = Σ θ_k G_k`.
    pub fn operator_monomials(&self) -> Vec<Monomial> {
        self.ops.iter().map(|t| t.0.clone()).collect()
    }

    /// Quadrature samples of every data piece; Euclidean products of the
    /// samples are the `L` products used in assembly.
    pub fn sample_data(&self, space: &FeSpace) -> Vec<Vec<f64>> {
        let n = self.dim + 1;
        let zero = vec![0.0; space.n_dofs()];
        self.data
            .iter()
            .map(|(_, piece)| {
                let mut v = sample_fe(space, &zero, Region::Cells, self.degree, n, |p, _, out| match piece {
                    DataPiece::Initial(_) => out.fill(0.0),
                    _ => piece.fill(p, out),
                });
                v.extend(sample_fe(
                    space,
                    &zero,
                    Region::Facets(BoundaryTag::Initial),
                    self.degree,
                    1,
                    |p, _, out| {
                        out[0] = match piece {
                            DataPiece::Initial(u) => u.eval(p),
                            _ => 0.0,
                        }
                    },
                ));
                v
            })
            .collect()
    }

    /// Quadrature samples of `G_k u` for every operator piece, `u` given by
    /// its free coefficients.
    pub fn sample_operators(&self, space: &FeSpace, free: &[f64]) -> Vec<Vec<f64>> {
        let n = self.dim + 1;
        let full = space.expand(free);
        self.ops
            .iter()
            .map(|(_, piece)| {
                let mut v = sample_fe(space, &full, Region::Cells, self.degree, n, |p, u, out| {
                    piece.apply(self.dim, p, u, out)
                });
                v.extend(sample_fe(
                    space,
                    &full,
                    Region::Facets(BoundaryTag::Initial),
                    self.degree,
                    1,
                    |_, u, out| {
                        out[0] = match piece {
                            OperatorPiece::Principal => u.value(0),
                            _ => 0.0,
                        }
                    },
                ));
                v
            })
            .collect()
    }

    /// `‖f[μ] − G[μ]u‖_L` by quadrature, `u` given by its free coefficients.
    pub fn residual_norm(&self, space: &FeSpace, mu: &[f64], free: &[f64]) -> f64 {
        let mut r = vec![0.0; 0];
        for ((m, _), v) in self.data.iter().zip(self.sample_data(space)) {
            if r.is_empty() {
                r = vec![0.0; v.len()];
            }
            let w = m.eval(mu);
            r.iter_mut().zip(&v).for_each(|(a, b)| *a += w * b);
        }
        for ((m, _), v) in self.ops.iter().zip(self.sample_operators(space, free)) {
            if r.is_empty() {
                r = vec![0.0; v.len()];
            }
            let w = m.eval(mu);
            r.iter_mut().zip(&v).for_each(|(a, b)| *a -= w * b);
        }
        r.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}
