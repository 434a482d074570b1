use std::fmt;
use std::sync::Arc;

use super::quadrature::QuadratureRule;
use crate::mesh::{invert_small, BoundaryTag, SpaceTimeMesh, TensorGrid};

/// Affine map of a reference cell onto a physical cell.
#[derive(Debug, Clone, Copy)]
pub enum CellGeometry {
    /// `p = origin + J ξ` on the reference simplex.
    Simplex {
        n: usize,
        origin: [f64; 3],
        jac: [[f64; 3]; 3],
        inv: [[f64; 3]; 3],
        det: f64,
    },
    /// `(t, x) = (t₀ + τ h_t, x₀ + χ h_x)` on `[0,1]²`.
    Box { t0: f64, ht: f64, x0: f64, hx: f64 },
}

impl CellGeometry {
    pub fn space_time_dim(&self) -> usize {
        match self {
            CellGeometry::Simplex { n, .. } => *n,
            CellGeometry::Box { .. } => 2,
        }
    }

    pub fn to_physical(&self, xi: &[f64], out: &mut [f64]) {
        match self {
            CellGeometry::Simplex { n, origin, jac, .. } => {
                for r in 0..*n {
                    out[r] = origin[r] + (0..*n).map(|k| jac[r][k] * xi[k]).sum::<f64>();
                }
            }
            CellGeometry::Box { t0, ht, x0, hx } => {
                out[0] = t0 + ht * xi[0];
                out[1] = x0 + hx * xi[1];
            }
        }
    }

    pub fn to_reference(&self, p: &[f64]) -> [f64; 3] {
        let mut xi = [0.0; 3];
        match self {
            CellGeometry::Simplex { n, origin, inv, .. } => {
                for r in 0..*n {
                    xi[r] = (0..*n).map(|k| inv[r][k] * (p[k] - origin[k])).sum();
                }
            }
            CellGeometry::Box { t0, ht, x0, hx } => {
                xi[0] = (p[0] - t0) / ht;
                xi[1] = (p[1] - x0) / hx;
            }
        }
        xi
    }

    /// `|det J|`, the ratio of physical to reference measure.
    pub fn abs_det(&self) -> f64 {
        match self {
            CellGeometry::Simplex { det, .. } => det.abs(),
            CellGeometry::Box { ht, hx, .. } => ht * hx,
        }
    }
}

/// Quadrature points on boundary facets, grouped by the cell owning the facet.
#[derive(Debug, Clone)]
pub struct FacetPoints {
    pub cell: usize,
    /// Physical points, flat with stride `d+1`.
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

/// A scalar finite-element basis on a space-time discretization.
pub trait ScalarBasis: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;
    /// Spatial dimension `d`.
    fn dim(&self) -> usize;
    fn degree(&self) -> usize;
    fn end_time(&self) -> f64;
    fn n_dofs(&self) -> usize;
    fn n_cells(&self) -> usize;
    fn n_local(&self) -> usize;
    fn cell_dofs(&self, c: usize) -> &[usize];
    fn geometry(&self, c: usize) -> CellGeometry;
    /// Reference-cell rule exact to `degree`.
    fn cell_rule(&self, degree: usize) -> QuadratureRule;
    /// Values and physical gradients (stride `d+1`) of the local basis at `xi`.
    fn eval(&self, geom: &CellGeometry, xi: &[f64], vals: &mut [f64], grads: &mut [f64]);
    /// Interpolation node of a dof.
    fn node(&self, dof: usize) -> Vec<f64>;
    fn on_lateral(&self, dof: usize) -> bool;
    fn locate(&self, p: &[f64]) -> Option<usize>;
    fn facet_points(&self, tag: BoundaryTag, degree: usize) -> Vec<FacetPoints>;
}

fn simplex_geometry(mesh: &SpaceTimeMesh, c: usize) -> CellGeometry {
    let n = mesh.dim() + 1;
    let jac = mesh.cell_jacobian(c);
    let det = match n {
        2 => jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0],
        _ => {
            jac[0][0] * (jac[1][1] * jac[2][2] - jac[1][2] * jac[2][1])
                - jac[0][1] * (jac[1][0] * jac[2][2] - jac[1][2] * jac[2][0])
                + jac[0][2] * (jac[1][0] * jac[2][1] - jac[1][1] * jac[2][0])
        }
    };
    let mut origin = [0.0; 3];
    origin[..n].copy_from_slice(mesh.vertex(mesh.cell(c)[0]));
    CellGeometry::Simplex {
        n,
        origin,
        jac,
        inv: invert_small(&jac, n),
        det,
    }
}

fn simplex_facet_points(mesh: &SpaceTimeMesh, tag: BoundaryTag, degree: usize) -> Vec<FacetPoints> {
    let d = mesh.dim();
    let n = d + 1;
    let rule = QuadratureRule::simplex(d, degree);
    let fact: f64 = (1..=d).map(|k| k as f64).product();
    mesh.facets_with_tag(tag)
        .map(|f| {
            let v0 = mesh.vertex(f.vertices[0]);
            let scale = fact * mesh.facet_measure(&f.vertices);
            let mut points = Vec::with_capacity(rule.len() * n);
            let mut weights = Vec::with_capacity(rule.len());
            for (xi, w) in rule.iter() {
                for r in 0..n {
                    let mut x = v0[r];
                    for k in 0..d {
                        x += xi[k] * (mesh.vertex(f.vertices[k + 1])[r] - v0[r]);
                    }
                    points.push(x);
                }
                weights.push(w * scale);
            }
            FacetPoints {
                cell: f.cell,
                points,
                weights,
            }
        })
        .collect()
}

/// Continuous piecewise affine functions on a simplicial mesh (vertex dofs).
#[derive(Debug, Clone)]
pub struct P1Basis {
    mesh: Arc<SpaceTimeMesh>,
    lateral: Vec<bool>,
}

impl P1Basis {
    pub fn new(mesh: Arc<SpaceTimeMesh>) -> Self {
        let lateral = mesh.lateral_vertices();
        Self { mesh, lateral }
    }

    pub fn mesh(&self) -> &Arc<SpaceTimeMesh> {
        &self.mesh
    }
}

impl ScalarBasis for P1Basis {
    fn name(&self) -> &'static str {
        "P1"
    }
    fn dim(&self) -> usize {
        self.mesh.dim()
    }
    fn degree(&self) -> usize {
        1
    }
    fn end_time(&self) -> f64 {
        self.mesh.end_time()
    }
    fn n_dofs(&self) -> usize {
        self.mesh.n_vertices()
    }
    fn n_cells(&self) -> usize {
        self.mesh.n_cells()
    }
    fn n_local(&self) -> usize {
        self.mesh.dim() + 2
    }
    fn cell_dofs(&self, c: usize) -> &[usize] {
        self.mesh.cell(c)
    }
    fn geometry(&self, c: usize) -> CellGeometry {
        simplex_geometry(&self.mesh, c)
    }
    fn cell_rule(&self, degree: usize) -> QuadratureRule {
        QuadratureRule::simplex(self.mesh.dim() + 1, degree)
    }
    fn eval(&self, geom: &CellGeometry, xi: &[f64], vals: &mut [f64], grads: &mut [f64]) {
        let CellGeometry::Simplex { n, inv, .. } = geom else {
            unreachable!("P1 on a simplex")
        };
        let n = *n;
        vals[0] = 1.0 - xi[..n].iter().sum::<f64>();
        vals[1..=n].copy_from_slice(&xi[..n]);
        for r in 0..n {
            let g0: f64 = (0..n).map(|s| inv[s][r]).sum();
            grads[r] = -g0;
            for k in 0..n {
                grads[(k + 1) * n + r] = inv[k][r];
            }
        }
    }
    fn node(&self, dof: usize) -> Vec<f64> {
        self.mesh.vertex(dof).to_vec()
    }
    fn on_lateral(&self, dof: usize) -> bool {
        self.lateral[dof]
    }
    fn locate(&self, p: &[f64]) -> Option<usize> {
        self.mesh.locate(p)
    }
    fn facet_points(&self, tag: BoundaryTag, degree: usize) -> Vec<FacetPoints> {
        simplex_facet_points(&self.mesh, tag, degree)
    }
}

/// Discontinuous piecewise constants on a simplicial mesh (one dof per cell).
#[derive(Debug, Clone)]
pub struct P0Basis {
    mesh: Arc<SpaceTimeMesh>,
    ids: Vec<usize>,
}

impl P0Basis {
    pub fn new(mesh: Arc<SpaceTimeMesh>) -> Self {
        let ids = (0..mesh.n_cells()).collect();
        Self { mesh, ids }
    }
}

impl ScalarBasis for P0Basis {
    fn name(&self) -> &'static str {
        "P0"
    }
    fn dim(&self) -> usize {
        self.mesh.dim()
    }
    fn degree(&self) -> usize {
        0
    }
    fn end_time(&self) -> f64 {
        self.mesh.end_time()
    }
    fn n_dofs(&self) -> usize {
        self.mesh.n_cells()
    }
    fn n_cells(&self) -> usize {
        self.mesh.n_cells()
    }
    fn n_local(&self) -> usize {
        1
    }
    fn cell_dofs(&self, c: usize) -> &[usize] {
        &self.ids[c..c + 1]
    }
    fn geometry(&self, c: usize) -> CellGeometry {
        simplex_geometry(&self.mesh, c)
    }
    fn cell_rule(&self, degree: usize) -> QuadratureRule {
        QuadratureRule::simplex(self.mesh.dim() + 1, degree)
    }
    fn eval(&self, geom: &CellGeometry, _xi: &[f64], vals: &mut [f64], grads: &mut [f64]) {
        vals[0] = 1.0;
        grads[..geom.space_time_dim()].fill(0.0);
    }
    fn node(&self, dof: usize) -> Vec<f64> {
        let cell = self.mesh.cell(dof);
        let n = self.mesh.dim() + 1;
        let mut c = vec![0.0; n];
        for &v in cell {
            for (r, x) in self.mesh.vertex(v).iter().enumerate() {
                c[r] += x / cell.len() as f64;
            }
        }
        c
    }
    fn on_lateral(&self, _dof: usize) -> bool {
        false
    }
    fn locate(&self, p: &[f64]) -> Option<usize> {
        self.mesh.locate(p)
    }
    fn facet_points(&self, tag: BoundaryTag, degree: usize) -> Vec<FacetPoints> {
        simplex_facet_points(&self.mesh, tag, degree)
    }
}

const Q3_NODES: [f64; 4] = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];

/// Cubic Lagrange polynomials on `[0,1]` with equispaced nodes, and derivatives.
fn lagrange3(s: f64) -> ([f64; 4], [f64; 4]) {
    let mut v = [0.0; 4];
    let mut d = [0.0; 4];
    for a in 0..4 {
        let mut denom = 1.0;
        let mut prod = 1.0;
        for b in 0..4 {
            if b != a {
                denom *= Q3_NODES[a] - Q3_NODES[b];
                prod *= s - Q3_NODES[b];
            }
        }
        let mut der = 0.0;
        for skip in 0..4 {
            if skip == a {
                continue;
            }
            let mut p = 1.0;
            for b in 0..4 {
                if b != a && b != skip {
                    p *= s - Q3_NODES[b];
                }
            }
            der += p;
        }
        v[a] = prod / denom;
        d[a] = der / denom;
    }
    (v, d)
}

/// Continuous piecewise bicubic functions on a tensor grid of `(0,T) × (a,b)`.
#[derive(Debug, Clone)]
pub struct Q3Basis {
    grid: Arc<TensorGrid>,
    dofs: Vec<usize>,
}

impl Q3Basis {
    pub fn new(grid: Arc<TensorGrid>) -> Self {
        let nxd = 3 * grid.nx() + 1;
        let mut dofs = Vec::with_capacity(grid.n_cells() * 16);
        for i in 0..grid.nt() {
            for j in 0..grid.nx() {
                for a in 0..4 {
                    for b in 0..4 {
                        dofs.push((3 * i + a) * nxd + 3 * j + b);
                    }
                }
            }
        }
        Self { grid, dofs }
    }

    pub fn grid(&self) -> &Arc<TensorGrid> {
        &self.grid
    }

    fn node_1d(breaks: &[f64], k: usize) -> f64 {
        let cell = (k / 3).min(breaks.len() - 2);
        let a = k - 3 * cell;
        breaks[cell] + Q3_NODES[a] * (breaks[cell + 1] - breaks[cell])
    }
}

impl ScalarBasis for Q3Basis {
    fn name(&self) -> &'static str {
        "Q3"
    }
    fn dim(&self) -> usize {
        1
    }
    fn degree(&self) -> usize {
        3
    }
    fn end_time(&self) -> f64 {
        self.grid.end_time()
    }
    fn n_dofs(&self) -> usize {
        (3 * self.grid.nt() + 1) * (3 * self.grid.nx() + 1)
    }
    fn n_cells(&self) -> usize {
        self.grid.n_cells()
    }
    fn n_local(&self) -> usize {
        16
    }
    fn cell_dofs(&self, c: usize) -> &[usize] {
        &self.dofs[c * 16..(c + 1) * 16]
    }
    fn geometry(&self, c: usize) -> CellGeometry {
        let ((t0, t1), (x0, x1)) = self.grid.cell_bounds(c);
        CellGeometry::Box {
            t0,
            ht: t1 - t0,
            x0,
            hx: x1 - x0,
        }
    }
    fn cell_rule(&self, degree: usize) -> QuadratureRule {
        QuadratureRule::gauss_box(2, (degree + 2) / 2)
    }
    fn eval(&self, geom: &CellGeometry, xi: &[f64], vals: &mut [f64], grads: &mut [f64]) {
        let CellGeometry::Box { ht, hx, .. } = geom else {
            unreachable!("Q3 on a box")
        };
        let (lt, dt) = lagrange3(xi[0]);
        let (lx, dx) = lagrange3(xi[1]);
        for a in 0..4 {
            for b in 0..4 {
                let k = 4 * a + b;
                vals[k] = lt[a] * lx[b];
                grads[2 * k] = dt[a] * lx[b] / ht;
                grads[2 * k + 1] = lt[a] * dx[b] / hx;
            }
        }
    }
    fn node(&self, dof: usize) -> Vec<f64> {
        let nxd = 3 * self.grid.nx() + 1;
        vec![
            Self::node_1d(self.grid.breakpoints_t(), dof / nxd),
            Self::node_1d(self.grid.breakpoints_x(), dof % nxd),
        ]
    }
    fn on_lateral(&self, dof: usize) -> bool {
        let nxd = 3 * self.grid.nx() + 1;
        let k = dof % nxd;
        k == 0 || k == nxd - 1
    }
    fn locate(&self, p: &[f64]) -> Option<usize> {
        self.grid.locate(p)
    }
    fn facet_points(&self, tag: BoundaryTag, degree: usize) -> Vec<FacetPoints> {
        let rule = QuadratureRule::gauss_interval((degree + 2) / 2);
        let g = &self.grid;
        let (nt, nx) = (g.nt(), g.nx());
        let mut out = Vec::new();
        let mut push = |cell: usize, fixed_t: Option<f64>, fixed_x: Option<f64>| {
            let ((t0, t1), (x0, x1)) = g.cell_bounds(cell);
            let mut points = Vec::new();
            let mut weights = Vec::new();
            for (s, w) in rule.iter() {
                match (fixed_t, fixed_x) {
                    (Some(t), None) => {
                        points.extend([t, x0 + s[0] * (x1 - x0)]);
                        weights.push(w * (x1 - x0));
                    }
                    (None, Some(x)) => {
                        points.extend([t0 + s[0] * (t1 - t0), x]);
                        weights.push(w * (t1 - t0));
                    }
                    _ => unreachable!(),
                }
            }
            out.push(FacetPoints {
                cell,
                points,
                weights,
            });
        };
        match tag {
            BoundaryTag::Initial => (0..nx).for_each(|j| push(g.cell_index(0, j), Some(0.0), None)),
            BoundaryTag::Final => {
                (0..nx).for_each(|j| push(g.cell_index(nt - 1, j), Some(g.end_time()), None))
            }
            BoundaryTag::Lateral => {
                let (a, b) = (g.breakpoints_x()[0], g.breakpoints_x()[nx]);
                for i in 0..nt {
                    push(g.cell_index(i, 0), None, Some(a));
                    push(g.cell_index(i, nx - 1), None, Some(b));
                }
            }
        }
        out
    }
}
