use rayon::prelude::*;

use super::basis::FacetPoints;
use super::space::{FeSpace, FeValue, Region};
use super::FemError;
use crate::linalg::CsrMatrix;

const CHUNK: usize = 256;
const BATCH: usize = 64 * CHUNK;

/// Pointwise linear map from a basis function to a feature vector.
///
/// A form is `∫ Σᵣ feat_test(v)ᵣ · feat_trial(u)ᵣ`; `features` receives the
/// component the scalar basis function sits in, its value and its physical
/// space-time gradient.
pub trait FormKernel: Sync {
    fn width(&self) -> usize;
    fn features(&self, p: &[f64], comp: usize, value: f64, grad: &[f64], out: &mut [f64]);
}

/// Kernel built from a closure.
pub struct KernelFn<F> {
    width: usize,
    f: F,
}

pub fn kernel<F>(width: usize, f: F) -> KernelFn<F>
where
    F: Fn(&[f64], usize, f64, &[f64], &mut [f64]) + Sync,
{
    KernelFn { width, f }
}

impl<F> FormKernel for KernelFn<F>
where
    F: Fn(&[f64], usize, f64, &[f64], &mut [f64]) + Sync,
{
    fn width(&self) -> usize {
        self.width
    }
    fn features(&self, p: &[f64], comp: usize, value: f64, grad: &[f64], out: &mut [f64]) {
        (self.f)(p, comp, value, grad, out)
    }
}

/// Quadrature data of one integration item (a cell or a boundary facet).
struct ItemPoints {
    cell: usize,
    /// Reference coordinates, stride 3.
    xi: Vec<[f64; 3]>,
    /// Physical coordinates, stride `n`.
    p: Vec<f64>,
    w: Vec<f64>,
}

enum Items {
    Cells { n_cells: usize, rule: super::QuadratureRule },
    Facets(Vec<FacetPoints>),
}

impl Items {
    fn new(space: &FeSpace, region: Region, degree: usize) -> Self {
        match region {
            Region::Cells => Items::Cells {
                n_cells: space.basis().n_cells(),
                rule: space.basis().cell_rule(degree),
            },
            Region::Facets(tag) => Items::Facets(space.basis().facet_points(tag, degree)),
        }
    }

    fn len(&self) -> usize {
        match self {
            Items::Cells { n_cells, .. } => *n_cells,
            Items::Facets(f) => f.len(),
        }
    }

    fn points(&self, space: &FeSpace, k: usize) -> ItemPoints {
        let n = space.dim() + 1;
        match self {
            Items::Cells { rule, .. } => {
                let geom = space.basis().geometry(k);
                let det = geom.abs_det();
                let mut xi = Vec::with_capacity(rule.len());
                let mut p = vec![0.0; rule.len() * n];
                let mut w = Vec::with_capacity(rule.len());
                for (q, (r, wt)) in rule.iter().enumerate() {
                    let mut x = [0.0; 3];
                    x[..r.len()].copy_from_slice(r);
                    geom.to_physical(r, &mut p[q * n..(q + 1) * n]);
                    xi.push(x);
                    w.push(wt * det);
                }
                ItemPoints { cell: k, xi, p, w }
            }
            Items::Facets(f) => {
                let fp = &f[k];
                let geom = space.basis().geometry(fp.cell);
                let xi = fp.points.chunks_exact(n).map(|p| geom.to_reference(p)).collect();
                ItemPoints {
                    cell: fp.cell,
                    xi,
                    p: fp.points.clone(),
                    w: fp.weights.clone(),
                }
            }
        }
    }
}

/// Features of every local function `(comp, i)` at every point: `[q][comp·nl + i][r]`.
fn local_features(space: &FeSpace, kern: &dyn FormKernel, item: &ItemPoints) -> Vec<f64> {
    let basis = space.basis();
    let n = space.dim() + 1;
    let nl = basis.n_local();
    let nc = space.components();
    let m = kern.width();
    let geom = basis.geometry(item.cell);
    let mut vals = vec![0.0; nl];
    let mut grads = vec![0.0; nl * n];
    let nq = item.w.len();
    let mut out = vec![0.0; nq * nc * nl * m];
    for q in 0..nq {
        basis.eval(&geom, &item.xi[q], &mut vals, &mut grads);
        let p = &item.p[q * n..(q + 1) * n];
        for comp in 0..nc {
            for i in 0..nl {
                let off = ((q * nc + comp) * nl + i) * m;
                kern.features(p, comp, vals[i], &grads[i * n..(i + 1) * n], &mut out[off..off + m]);
            }
        }
    }
    out
}

/// Sparsity pattern of all component blocks, rows of `test`, columns of `trial`.
fn pattern(test: &FeSpace, trial: &FeSpace) -> (Vec<usize>, Vec<usize>) {
    let (bt, br) = (test.basis(), trial.basis());
    let ncols_s = br.n_dofs() as u64;
    let mut pairs: Vec<u64> = Vec::with_capacity(bt.n_cells() * bt.n_local() * br.n_local());
    for c in 0..bt.n_cells() {
        for &i in bt.cell_dofs(c) {
            for &j in br.cell_dofs(c) {
                pairs.push(i as u64 * ncols_s + j as u64);
            }
        }
    }
    pairs.par_sort_unstable();
    pairs.dedup();
    let ns_t = bt.n_dofs();
    let ns_r = br.n_dofs();
    let mut srow = vec![0usize; ns_t + 1];
    for &p in &pairs {
        srow[(p / ncols_s) as usize + 1] += 1;
    }
    for i in 0..ns_t {
        srow[i + 1] += srow[i];
    }
    let scol: Vec<usize> = pairs.iter().map(|&p| (p % ncols_s) as usize).collect();
    let (ct, cr) = (test.components(), trial.components());
    let mut row_ptr = Vec::with_capacity(ct * ns_t + 1);
    let mut col_idx = Vec::with_capacity(ct * cr * scol.len());
    row_ptr.push(0);
    for _a in 0..ct {
        for i in 0..ns_t {
            for b in 0..cr {
                col_idx.extend(scol[srow[i]..srow[i + 1]].iter().map(|&j| b * ns_r + j));
            }
            row_ptr.push(col_idx.len());
        }
    }
    (row_ptr, col_idx)
}

/// Assembles `M[i][j] = ∫ feat_test(φᵢ) · feat_trial(φⱼ)` over all dofs
/// (constrained ones included) of two spaces on the same cells.
pub fn assemble_matrix(
    test: &FeSpace,
    trial: &FeSpace,
    region: Region,
    degree: usize,
    test_kernel: &dyn FormKernel,
    trial_kernel: &dyn FormKernel,
) -> Result<CsrMatrix, FemError> {
    if !test.same_cells(trial) {
        return Err(FemError::Mismatch("test and trial spaces live on different cells".into()));
    }
    let m = test_kernel.width();
    if trial_kernel.width() != m {
        return Err(FemError::Mismatch(format!(
            "kernel widths {m} and {}",
            trial_kernel.width()
        )));
    }
    let (row_ptr, col_idx) = pattern(test, trial);
    let mut values = vec![0.0; col_idx.len()];
    let items = Items::new(test, region, degree);
    let (nlt, nlr) = (test.basis().n_local(), trial.basis().n_local());
    let (ct, cr) = (test.components(), trial.components());
    let (ns_t, ns_r) = (test.n_scalar(), trial.n_scalar());
    let same = std::ptr::eq(test, trial) && std::ptr::eq(test_kernel as *const _ as *const u8, trial_kernel as *const _ as *const u8);
    let total = items.len();
    let mut start = 0;
    while start < total {
        let end = (start + BATCH).min(total);
        let locals: Vec<Vec<(usize, Vec<f64>)>> = (start..end)
            .collect::<Vec<_>>()
            .par_chunks(CHUNK)
            .map(|ks| {
                ks.iter()
                    .map(|&k| {
                        let item = items.points(test, k);
                        let ft = local_features(test, test_kernel, &item);
                        let fr = if same { ft.clone() } else { local_features(trial, trial_kernel, &item) };
                        let (a_n, b_n) = (ct * nlt, cr * nlr);
                        let mut loc = vec![0.0; a_n * b_n];
                        for (q, &w) in item.w.iter().enumerate() {
                            let ftq = &ft[q * a_n * m..(q + 1) * a_n * m];
                            let frq = &fr[q * b_n * m..(q + 1) * b_n * m];
                            for a in 0..a_n {
                                let fa = &ftq[a * m..(a + 1) * m];
                                if fa.iter().all(|&x| x == 0.0) {
                                    continue;
                                }
                                for b in 0..b_n {
                                    let fb = &frq[b * m..(b + 1) * m];
                                    let s: f64 = fa.iter().zip(fb).map(|(x, y)| x * y).sum();
                                    loc[a * b_n + b] += w * s;
                                }
                            }
                        }
                        (item.cell, loc)
                    })
                    .collect()
            })
            .collect();
        for chunk in locals {
            for (cell, loc) in chunk {
                let dt = test.basis().cell_dofs(cell);
                let dr = trial.basis().cell_dofs(cell);
                let b_n = cr * nlr;
                for a in 0..ct * nlt {
                    let row = (a / nlt) * ns_t + dt[a % nlt];
                    let cols = &col_idx[row_ptr[row]..row_ptr[row + 1]];
                    for b in 0..b_n {
                        let v = loc[a * b_n + b];
                        if v == 0.0 {
                            continue;
                        }
                        let col = (b / nlr) * ns_r + dr[b % nlr];
                        let pos = cols.binary_search(&col).expect("column in pattern");
                        values[row_ptr[row] + pos] += v;
                    }
                }
            }
        }
        start = end;
    }
    Ok(CsrMatrix::from_raw(test.n_dofs(), trial.n_dofs(), row_ptr, col_idx, values))
}

/// Assembles `ℓ[i] = ∫ data · feat(φᵢ)` over all dofs.
pub fn assemble_vector<D>(
    space: &FeSpace,
    region: Region,
    degree: usize,
    kern: &dyn FormKernel,
    data: D,
) -> Vec<f64>
where
    D: Fn(&[f64], &mut [f64]) + Sync,
{
    let items = Items::new(space, region, degree);
    let m = kern.width();
    let n = space.dim() + 1;
    let nl = space.basis().n_local();
    let nc = space.components();
    let ns = space.n_scalar();
    let mut out = vec![0.0; space.n_dofs()];
    let total = items.len();
    let mut start = 0;
    while start < total {
        let end = (start + BATCH).min(total);
        let locals: Vec<Vec<(usize, Vec<f64>)>> = (start..end)
            .collect::<Vec<_>>()
            .par_chunks(CHUNK)
            .map(|ks| {
                let mut dv = vec![0.0; m];
                ks.iter()
                    .map(|&k| {
                        let item = items.points(space, k);
                        let ft = local_features(space, kern, &item);
                        let mut loc = vec![0.0; nc * nl];
                        for (q, &w) in item.w.iter().enumerate() {
                            data(&item.p[q * n..(q + 1) * n], &mut dv);
                            for a in 0..nc * nl {
                                let fa = &ft[(q * nc * nl + a) * m..(q * nc * nl + a + 1) * m];
                                loc[a] += w * fa.iter().zip(&dv).map(|(x, y)| x * y).sum::<f64>();
                            }
                        }
                        (item.cell, loc)
                    })
                    .collect()
            })
            .collect();
        for chunk in locals {
            for (cell, loc) in chunk {
                let dofs = space.basis().cell_dofs(cell);
                for (a, v) in loc.into_iter().enumerate() {
                    out[(a / nl) * ns + dofs[a % nl]] += v;
                }
            }
        }
        start = end;
    }
    out
}

/// `∫ integrand(p, values)` where `values[k]` evaluates the `k`-th
/// `(space, full coefficients)` pair; all spaces must share cells.
pub fn integrate_fe_multi<I>(
    fns: &[(&FeSpace, &[f64])],
    region: Region,
    degree: usize,
    integrand: I,
) -> f64
where
    I: Fn(&[f64], &[FeValue]) -> f64 + Sync,
{
    let lead = fns[0].0;
    for (s, c) in fns {
        assert!(lead.same_cells(s), "spaces on different cells");
        assert_eq!(c.len(), s.n_dofs(), "coefficient length");
    }
    let items = Items::new(lead, region, degree);
    let n = lead.dim() + 1;
    let partial: Vec<f64> = (0..items.len())
        .collect::<Vec<_>>()
        .par_chunks(CHUNK)
        .map(|ks| {
            let mut bufs: Vec<(Vec<f64>, Vec<f64>)> = fns
                .iter()
                .map(|(s, _)| (vec![0.0; s.basis().n_local()], vec![0.0; s.basis().n_local() * n]))
                .collect();
            let mut vals: Vec<FeValue> = fns.iter().map(|(s, _)| FeValue::zeros(s.components(), n)).collect();
            let mut sum = 0.0;
            for &k in ks {
                let item = items.points(lead, k);
                let geoms: Vec<_> = fns.iter().map(|(s, _)| s.basis().geometry(item.cell)).collect();
                for (q, &w) in item.w.iter().enumerate() {
                    for (f, ((s, c), (bv, bg))) in fns.iter().zip(bufs.iter_mut()).enumerate() {
                        s.basis().eval(&geoms[f], &item.xi[q], bv, bg);
                        vals[f].clear();
                        s.accumulate(c, item.cell, bv, bg, &mut vals[f]);
                    }
                    sum += w * integrand(&item.p[q * n..(q + 1) * n], &vals);
                }
            }
            sum
        })
        .collect();
    partial.iter().sum()
}

/// Values `√w · sample(p, u)` at every quadrature point of a region, in item
/// order, `width` entries per point; Euclidean products of such vectors are
/// quadrature approximations of `L₂` products.
pub fn sample_fe<S>(space: &FeSpace, coeffs: &[f64], region: Region, degree: usize, width: usize, sample: S) -> Vec<f64>
where
    S: Fn(&[f64], &FeValue, &mut [f64]) + Sync,
{
    assert_eq!(coeffs.len(), space.n_dofs(), "coefficient length");
    let items = Items::new(space, region, degree);
    let n = space.dim() + 1;
    let parts: Vec<Vec<f64>> = (0..items.len())
        .collect::<Vec<_>>()
        .par_chunks(CHUNK)
        .map(|ks| {
            let nl = space.basis().n_local();
            let (mut bv, mut bg) = (vec![0.0; nl], vec![0.0; nl * n]);
            let mut val = FeValue::zeros(space.components(), n);
            let mut out = Vec::new();
            let mut buf = vec![0.0; width];
            for &k in ks {
                let item = items.points(space, k);
                let geom = space.basis().geometry(item.cell);
                for (q, &w) in item.w.iter().enumerate() {
                    space.basis().eval(&geom, &item.xi[q], &mut bv, &mut bg);
                    val.clear();
                    space.accumulate(coeffs, item.cell, &bv, &bg, &mut val);
                    sample(&item.p[q * n..(q + 1) * n], &val, &mut buf);
                    let sw = w.sqrt();
                    out.extend(buf.iter().map(|x| sw * x));
                }
            }
            out
        })
        .collect();
    parts.concat()
}

pub fn integrate_fe<I>(space: &FeSpace, coeffs: &[f64], region: Region, degree: usize, integrand: I) -> f64
where
    I: Fn(&[f64], &FeValue) -> f64 + Sync,
{
    integrate_fe_multi(&[(space, coeffs)], region, degree, |p, v| integrand(p, &v[0]))
}

/// `∫ f` over a region of the discretization underlying `space`.
pub fn integrate<F>(space: &FeSpace, region: Region, degree: usize, f: F) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let zero = vec![0.0; space.n_dofs()];
    integrate_fe(space, &zero, region, degree, |p, _| f(p))
}

/// Checks that all listed spaces share one discretization.
pub fn check_same_cells(spaces: &[&FeSpace]) -> Result<(), FemError> {
    if spaces.windows(2).all(|w| w[0].same_cells(w[1])) {
        Ok(())
    } else {
        Err(FemError::Mismatch("spaces live on different cells".into()))
    }
}
