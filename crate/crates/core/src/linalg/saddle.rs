use faer::linalg::solvers::Solve;
use faer::prelude::*;

use super::solvers::{pcg, SparseCholesky, SpdSolver};
use super::sparse::{axpy, dot, norm2, CsrMatrix};
use super::LinalgError;
use crate::registry::Registry;

/// Blocks of the state/control/co-state system
///
/// ```text
/// [ D  0  A ] [u]   [g_u]
/// [ 0  E  Bᵀ] [z] = [g_z]
/// [ A  B  0 ] [p]   [ f ]
/// ```
///
/// with `A`, `D`, `E` symmetric and `B` of shape `nu × nz`.
#[derive(Debug, Clone)]
pub struct BlockSaddleMatrix {
    pub d: CsrMatrix,
    pub e: CsrMatrix,
    pub a: CsrMatrix,
    pub b: CsrMatrix,
}

#[derive(Debug, Clone)]
pub struct SaddleSolution {
    pub u: Vec<f64>,
    pub z: Vec<f64>,
    pub p: Vec<f64>,
    /// Relative residual of the full block system.
    pub residual: f64,
    pub iterations: usize,
}

impl BlockSaddleMatrix {
    pub fn new(
        d: CsrMatrix,
        e: CsrMatrix,
        a: CsrMatrix,
        b: CsrMatrix,
    ) -> Result<Self, LinalgError> {
        let nu = a.nrows();
        let nz = e.nrows();
        let shapes = [
            ("A", a.nrows(), a.ncols(), nu, nu),
            ("D", d.nrows(), d.ncols(), nu, nu),
            ("E", e.nrows(), e.ncols(), nz, nz),
            ("B", b.nrows(), b.ncols(), nu, nz),
        ];
        for (name, r, c, er, ec) in shapes {
            if (r, c) != (er, ec) {
                return Err(LinalgError::Dimension(format!(
                    "block {name} is {r}x{c}, expected {er}x{ec}"
                )));
            }
        }
        Ok(Self { d, e, a, b })
    }

    pub fn nu(&self) -> usize {
        self.a.nrows()
    }

    pub fn nz(&self) -> usize {
        self.e.nrows()
    }

    pub fn dim(&self) -> usize {
        2 * self.nu() + self.nz()
    }

    /// Full symmetric operator in `(u, z, p)` ordering.
    pub fn assemble(&self) -> CsrMatrix {
        let bt = self.b.transpose();
        CsrMatrix::from_blocks(&[
            vec![Some(&self.d), None, Some(&self.a)],
            vec![None, Some(&self.e), Some(&bt)],
            vec![Some(&self.a), Some(&self.b), None],
        ])
    }

    /// Block product; returns the three row blocks.
    pub fn apply(&self, u: &[f64], z: &[f64], p: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut r1 = self.d.mul_vec(u);
        axpy(1.0, &self.a.mul_vec(p), &mut r1);
        let mut r2 = self.e.mul_vec(z);
        axpy(1.0, &self.b.mul_transpose_vec(p), &mut r2);
        let mut r3 = self.a.mul_vec(u);
        axpy(1.0, &self.b.mul_vec(z), &mut r3);
        (r1, r2, r3)
    }

    /// `‖rhs − K x‖ / ‖rhs‖` over the full block system.
    pub fn relative_residual(
        &self,
        sol: (&[f64], &[f64], &[f64]),
        rhs: (&[f64], &[f64], &[f64]),
    ) -> f64 {
        let (r1, r2, r3) = self.apply(sol.0, sol.1, sol.2);
        let mut num = 0.0;
        let mut den = 0.0;
        for (r, b) in [(r1, rhs.0), (r2, rhs.1), (r3, rhs.2)] {
            for (ri, bi) in r.iter().zip(b) {
                num += (bi - ri).powi(2);
                den += bi * bi;
            }
        }
        if den > 0.0 {
            (num / den).sqrt()
        } else {
            num.sqrt()
        }
    }

    fn check_rhs(&self, g_u: &[f64], g_z: &[f64], f: &[f64]) -> Result<(), LinalgError> {
        if g_u.len() != self.nu() || f.len() != self.nu() || g_z.len() != self.nz() {
            return Err(LinalgError::Dimension(format!(
                "rhs lengths ({}, {}, {}) for blocks ({}, {}, {})",
                g_u.len(),
                g_z.len(),
                f.len(),
                self.nu(),
                self.nz(),
                self.nu()
            )));
        }
        Ok(())
    }
}

/// Strategy for the symmetric indefinite block system.
pub trait SaddleSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(
        &self,
        system: &BlockSaddleMatrix,
        g_u: &[f64],
        g_z: &[f64],
        f: &[f64],
    ) -> Result<SaddleSolution, LinalgError>;
}

/// Registered saddle strategies: `direct`, `minres` and `reduced-cg`.
pub fn saddle_solvers() -> Registry<dyn SaddleSolver> {
    Registry::new("saddle solver")
        .with(
            "direct",
            "sparse LU of the assembled block operator",
            || Box::new(DirectSaddle) as Box<dyn SaddleSolver>,
        )
        .with(
            "minres",
            "MINRES with block-diagonal preconditioner diag(A, E, A)",
            || Box::new(Minres::default()) as Box<dyn SaddleSolver>,
        )
        .with(
            "reduced-cg",
            "eliminates state and co-state, CG on the control Schur complement",
            || Box::new(ReducedCg::default()) as Box<dyn SaddleSolver>,
        )
}

fn split(x: &[f64], nu: usize, nz: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    (
        x[..nu].to_vec(),
        x[nu..nu + nz].to_vec(),
        x[nu + nz..].to_vec(),
    )
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DirectSaddle;

impl SaddleSolver for DirectSaddle {
    fn name(&self) -> &'static str {
        "direct"
    }

    fn solve(
        &self,
        s: &BlockSaddleMatrix,
        g_u: &[f64],
        g_z: &[f64],
        f: &[f64],
    ) -> Result<SaddleSolution, LinalgError> {
        s.check_rhs(g_u, g_z, f)?;
        let (nu, nz) = (s.nu(), s.nz());
        let n = s.dim();
        let k = s.assemble().to_faer()?;
        let lu = k
            .sp_lu()
            .map_err(|e| LinalgError::Singular(format!("{e:?}")))?;
        let rhs: Vec<f64> = g_u.iter().chain(g_z).chain(f).copied().collect();
        let x = lu.solve(Col::<f64>::from_fn(n, |i| rhs[i]));
        let x: Vec<f64> = (0..n).map(|i| x[i]).collect();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::Singular("non-finite LU solution".into()));
        }
        let (u, z, p) = split(&x, nu, nz);
        let residual = s.relative_residual((&u, &z, &p), (g_u, g_z, f));
        Ok(SaddleSolution {
            u,
            z,
            p,
            residual,
            iterations: 1,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Minres {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for Minres {
    fn default() -> Self {
        Self {
            rel_tol: 1e-13,
            max_iter: 20_000,
        }
    }
}

impl SaddleSolver for Minres {
    fn name(&self) -> &'static str {
        "minres"
    }

    fn solve(
        &self,
        s: &BlockSaddleMatrix,
        g_u: &[f64],
        g_z: &[f64],
        f: &[f64],
    ) -> Result<SaddleSolution, LinalgError> {
        s.check_rhs(g_u, g_z, f)?;
        let (nu, nz) = (s.nu(), s.nz());
        let fa = SparseCholesky.factor(&s.a)?;
        let fe = SparseCholesky.factor(&s.e)?;
        let precond = |r: &[f64], out: &mut [f64]| -> Result<(), LinalgError> {
            out[..nu].copy_from_slice(&fa.solve(&r[..nu])?);
            out[nu..nu + nz].copy_from_slice(&fe.solve(&r[nu..nu + nz])?);
            out[nu + nz..].copy_from_slice(&fa.solve(&r[nu + nz..])?);
            Ok(())
        };
        let apply = |x: &[f64], out: &mut [f64]| {
            let (r1, r2, r3) = s.apply(&x[..nu], &x[nu..nu + nz], &x[nu + nz..]);
            out[..nu].copy_from_slice(&r1);
            out[nu..nu + nz].copy_from_slice(&r2);
            out[nu + nz..].copy_from_slice(&r3);
        };
        let rhs: Vec<f64> = g_u.iter().chain(g_z).chain(f).copied().collect();
        let (x, iterations) = minres(apply, precond, &rhs, self.rel_tol, self.max_iter)?;
        let (u, z, p) = split(&x, nu, nz);
        let residual = s.relative_residual((&u, &z, &p), (g_u, g_z, f));
        Ok(SaddleSolution {
            u,
            z,
            p,
            residual,
            iterations,
        })
    }
}

/// Preconditioned MINRES for a symmetric operator with an SPD preconditioner.
fn minres<A, P>(
    apply: A,
    precond: P,
    b: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize), LinalgError>
where
    A: Fn(&[f64], &mut [f64]),
    P: Fn(&[f64], &mut [f64]) -> Result<(), LinalgError>,
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut v_prev = vec![0.0; n];
    let mut v = b.to_vec();
    let mut z = vec![0.0; n];
    precond(&v, &mut z)?;
    let mut gamma = dot(&v, &z);
    if gamma < 0.0 {
        return Err(LinalgError::NotPositiveDefinite(
            "minres preconditioner".into(),
        ));
    }
    gamma = gamma.sqrt();
    if gamma == 0.0 {
        return Ok((x, 0));
    }
    let eta0 = gamma;
    let mut eta = gamma;
    let mut gamma_prev = 1.0;
    let (mut c_prev, mut c, mut s_prev, mut s) = (1.0, 1.0, 0.0, 0.0);
    let mut w_prev = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut az = vec![0.0; n];
    let mut z_new = vec![0.0; n];
    for it in 0..max_iter {
        z.iter_mut().for_each(|zi| *zi /= gamma);
        apply(&z, &mut az);
        let delta = dot(&az, &z);
        let mut v_new = az.clone();
        axpy(-delta / gamma, &v, &mut v_new);
        axpy(-gamma / gamma_prev, &v_prev, &mut v_new);
        precond(&v_new, &mut z_new)?;
        let g2 = dot(&v_new, &z_new);
        if g2 < 0.0 {
            return Err(LinalgError::NotPositiveDefinite(
                "minres preconditioner".into(),
            ));
        }
        let gamma_new = g2.sqrt();
        let a0 = c * delta - c_prev * s * gamma;
        let a1 = a0.hypot(gamma_new);
        let a2 = s * delta + c_prev * c * gamma;
        let a3 = s_prev * gamma;
        let c_new = a0 / a1;
        let s_new = gamma_new / a1;
        let mut w_new = z.clone();
        axpy(-a3, &w_prev, &mut w_new);
        axpy(-a2, &w, &mut w_new);
        w_new.iter_mut().for_each(|wi| *wi /= a1);
        axpy(c_new * eta, &w_new, &mut x);
        eta *= -s_new;
        if eta.abs() <= rel_tol * eta0 || gamma_new == 0.0 {
            return Ok((x, it + 1));
        }
        v_prev = std::mem::replace(&mut v, v_new);
        std::mem::swap(&mut z, &mut z_new);
        gamma_prev = gamma;
        gamma = gamma_new;
        c_prev = c;
        c = c_new;
        s_prev = s;
        s = s_new;
        w_prev = std::mem::replace(&mut w, w_new);
    }
    Err(LinalgError::NoConvergence {
        method: "minres",
        iterations: max_iter,
        residual: eta.abs() / eta0,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ReducedCg {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for ReducedCg {
    fn default() -> Self {
        Self {
            rel_tol: 1e-13,
            max_iter: 5_000,
        }
    }
}

impl SaddleSolver for ReducedCg {
    fn name(&self) -> &'static str {
        "reduced-cg"
    }

    fn solve(
        &self,
        s: &BlockSaddleMatrix,
        g_u: &[f64],
        g_z: &[f64],
        f: &[f64],
    ) -> Result<SaddleSolution, LinalgError> {
        s.check_rhs(g_u, g_z, f)?;
        let fa = SparseCholesky.factor(&s.a)?;
        let solve_a = |r: &[f64]| fa.solve(r);
        // H z = g_z − Bᵀ A⁻¹ g_u + Bᵀ A⁻¹ D A⁻¹ f,  H = E + Bᵀ A⁻¹ D A⁻¹ B
        let a_inv_f = solve_a(f)?;
        let mut t = g_u.to_vec();
        axpy(-1.0, &s.d.mul_vec(&a_inv_f), &mut t);
        let mut rhs = g_z.to_vec();
        axpy(-1.0, &s.b.mul_transpose_vec(&solve_a(&t)?), &mut rhs);

        let failure = std::cell::RefCell::new(None);
        let apply_h = |y: &[f64], out: &mut [f64]| {
            let run = || -> Result<Vec<f64>, LinalgError> {
                let w = solve_a(&s.b.mul_vec(y))?;
                let q = solve_a(&s.d.mul_vec(&w))?;
                let mut h = s.e.mul_vec(y);
                axpy(1.0, &s.b.mul_transpose_vec(&q), &mut h);
                Ok(h)
            };
            match run() {
                Ok(h) => out.copy_from_slice(&h),
                Err(e) => {
                    out.iter_mut().for_each(|o| *o = 0.0);
                    failure.borrow_mut().get_or_insert(e);
                }
            }
        };
        let inv_e: Vec<f64> = s.e.diagonal().iter().map(|d| 1.0 / d).collect();
        let precond = |r: &[f64], out: &mut [f64]| {
            for ((o, ri), di) in out.iter_mut().zip(r).zip(&inv_e) {
                *o = ri * di;
            }
        };
        let (z, iterations) = pcg(apply_h, precond, &rhs, self.rel_tol, self.max_iter)?;
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        let mut fu = f.to_vec();
        axpy(-1.0, &s.b.mul_vec(&z), &mut fu);
        let u = solve_a(&fu)?;
        let mut gp = g_u.to_vec();
        axpy(-1.0, &s.d.mul_vec(&u), &mut gp);
        let p = solve_a(&gp)?;
        let residual = s.relative_residual((&u, &z, &p), (g_u, g_z, f));
        Ok(SaddleSolution {
            u,
            z,
            p,
            residual,
            iterations,
        })
    }
}

/// Helper for tests and diagnostics: `‖E z + Bᵀ p − g_z‖ / max(‖g_z‖, ‖E z‖)`.
pub fn control_optimality_residual(
    s: &BlockSaddleMatrix,
    z: &[f64],
    p: &[f64],
    g_z: &[f64],
) -> f64 {
    let ez = s.e.mul_vec(z);
    let mut r = ez.clone();
    axpy(1.0, &s.b.mul_transpose_vec(p), &mut r);
    axpy(-1.0, g_z, &mut r);
    let scale = norm2(g_z).max(norm2(&ez)).max(f64::MIN_POSITIVE);
    norm2(&r) / scale
}
