//! Conforming simplicial meshes of space-time domains and tensor-product grids.
//!
//! Coordinates are ordered `(t, x₁, …, x_d)`. Cells are stored as tagged
//! simplices `(x₀, …, x_n)_γ` whose refinement edge is `x₀x_n`.

mod builders;
mod io;
mod refine;
mod tensor;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use builders::{build_moving_domain_mesh, build_unit_cylinder_mesh};
pub use tensor::TensorGrid;

/// Absolute tolerance for geometric coincidence tests.
pub const GEOMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("unsupported mesh request: {0}")]
    Unsupported(String),
    #[error("refinement-edge tags are incompatible near edge ({0}, {1})")]
    IncompatibleTags(usize, usize),
    #[error("boundary facet {vertices:?} lies on the interior time slice t = {t}")]
    UnclassifiableFacet { vertices: Vec<usize>, t: f64 },
    #[error("nonconforming mesh: {0}")]
    Nonconforming(String),
    #[error("degenerate cell {0}")]
    Degenerate(usize),
    #[error("malformed mesh file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryTag {
    Initial,
    Lateral,
    Final,
}

impl BoundaryTag {
    pub fn name(self) -> &'static str {
        match self {
            BoundaryTag::Initial => "INITIAL",
            BoundaryTag::Lateral => "LATERAL",
            BoundaryTag::Final => "FINAL",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "INITIAL" => Some(BoundaryTag::Initial),
            "LATERAL" => Some(BoundaryTag::Lateral),
            "FINAL" => Some(BoundaryTag::Final),
            _ => None,
        }
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFacet {
    /// Sorted vertex indices.
    pub vertices: Vec<usize>,
    /// The unique cell containing the facet.
    pub cell: usize,
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone)]
pub struct SpaceTimeMesh {
    dim: usize,
    end_time: f64,
    coords: Vec<f64>,
    cells: Vec<usize>,
    tags: Vec<u8>,
    generation: Vec<u32>,
    parents: Vec<Option<[usize; 2]>>,
    boundary: Vec<BoundaryFacet>,
}

impl SpaceTimeMesh {
    /// Assembles a mesh from raw tagged cells and classifies its boundary.
    pub fn from_parts(
        dim: usize,
        end_time: f64,
        coords: Vec<f64>,
        cells: Vec<usize>,
        tags: Vec<u8>,
    ) -> Result<Self, MeshError> {
        if !(1..=2).contains(&dim) {
            return Err(MeshError::Unsupported(format!("spatial dimension {dim}")));
        }
        let nvc = dim + 2;
        if cells.len() % nvc != 0
            || tags.len() != cells.len() / nvc
            || coords.len() % (dim + 1) != 0
        {
            return Err(MeshError::Parse("inconsistent array lengths".into()));
        }
        let nv = coords.len() / (dim + 1);
        if let Some(&v) = cells.iter().find(|&&v| v >= nv) {
            return Err(MeshError::Parse(format!("vertex index {v} out of range")));
        }
        let nc = tags.len();
        let mut mesh = Self {
            dim,
            end_time,
            coords,
            cells,
            tags,
            generation: vec![0; nc],
            parents: vec![None; nv],
            boundary: Vec::new(),
        };
        for c in 0..nc {
            if mesh.cell_volume(c) <= GEOMETRY_TOL * GEOMETRY_TOL {
                return Err(MeshError::Degenerate(c));
            }
        }
        mesh.rebuild_boundary()?;
        Ok(mesh)
    }

    /// Spatial dimension `d`; cells are `(d+1)`-simplices.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn end_time(&self) -> f64 {
        self.end_time
    }

    pub fn n_vertices(&self) -> usize {
        self.coords.len() / (self.dim + 1)
    }

    pub fn n_cells(&self) -> usize {
        self.tags.len()
    }

    pub fn vertices_per_cell(&self) -> usize {
        self.dim + 2
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        let s = self.dim + 1;
        &self.coords[i * s..(i + 1) * s]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Vertices of cell `c` in tagged order.
    pub fn cell(&self, c: usize) -> &[usize] {
        let s = self.dim + 2;
        &self.cells[c * s..(c + 1) * s]
    }

    pub fn cell_tag(&self, c: usize) -> u8 {
        self.tags[c]
    }

    pub fn cell_generation(&self, c: usize) -> u32 {
        self.generation[c]
    }

    /// Endpoints of the edge whose midpoint created vertex `i`, if any.
    pub fn vertex_parents(&self, i: usize) -> Option<[usize; 2]> {
        self.parents[i]
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.boundary
    }

    pub fn facets_with_tag(&self, tag: BoundaryTag) -> impl Iterator<Item = &BoundaryFacet> {
        self.boundary.iter().filter(move |f| f.tag == tag)
    }

    pub fn refinement_edge(&self, c: usize) -> (usize, usize) {
        let cell = self.cell(c);
        (cell[0], cell[self.dim + 1])
    }

    /// Jacobian columns `x_k − x_0`, row-major `(d+1)×(d+1)`.
    pub fn cell_jacobian(&self, c: usize) -> [[f64; 3]; 3] {
        let n = self.dim + 1;
        let cell = self.cell(c);
        let x0 = self.vertex(cell[0]);
        let mut j = [[0.0; 3]; 3];
        for k in 0..n {
            let xk = self.vertex(cell[k + 1]);
            for r in 0..n {
                j[r][k] = xk[r] - x0[r];
            }
        }
        j
    }

    /// Unsigned `(d+1)`-volume of cell `c`.
    pub fn cell_volume(&self, c: usize) -> f64 {
        let j = self.cell_jacobian(c);
        let (det, fact) = match self.dim {
            1 => (j[0][0] * j[1][1] - j[0][1] * j[1][0], 2.0),
            _ => (det3(&j), 6.0),
        };
        det.abs() / fact
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.n_cells()).map(|c| self.cell_volume(c)).sum()
    }

    pub fn cell_diameter(&self, c: usize) -> f64 {
        let cell = self.cell(c);
        let mut h: f64 = 0.0;
        for a in 0..cell.len() {
            for b in a + 1..cell.len() {
                h = h.max(dist(self.vertex(cell[a]), self.vertex(cell[b])));
            }
        }
        h
    }

    /// `min_K |K| / diam(K)^(d+1)`.
    pub fn min_shape_ratio(&self) -> f64 {
        (0..self.n_cells())
            .map(|c| self.cell_volume(c) / self.cell_diameter(c).powi(self.dim as i32 + 1))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_diameter(&self) -> f64 {
        (0..self.n_cells())
            .map(|c| self.cell_diameter(c))
            .fold(0.0, f64::max)
    }

    /// `d`-volume of a facet given by its vertices.
    pub fn facet_measure(&self, vertices: &[usize]) -> f64 {
        let p0 = self.vertex(vertices[0]);
        let e: Vec<Vec<f64>> = vertices[1..]
            .iter()
            .map(|&v| self.vertex(v).iter().zip(p0).map(|(a, b)| a - b).collect())
            .collect();
        match e.len() {
            1 => norm(&e[0]),
            2 => norm(&cross(&e[0], &e[1])) / 2.0,
            _ => unreachable!("facets have 2 or 3 vertices"),
        }
    }

    pub fn boundary_measure(&self, tag: Option<BoundaryTag>) -> f64 {
        self.boundary
            .iter()
            .filter(|f| tag.is_none_or(|t| f.tag == t))
            .map(|f| self.facet_measure(&f.vertices))
            .sum()
    }

    /// Reassigns boundary tags for end time `end_time`; idempotent.
    pub fn classify_boundary(&mut self, end_time: f64) -> Result<(), MeshError> {
        self.end_time = end_time;
        for k in 0..self.boundary.len() {
            let tag = self.classify_facet(&self.boundary[k].vertices)?;
            self.boundary[k].tag = tag;
        }
        Ok(())
    }

    fn classify_facet(&self, vertices: &[usize]) -> Result<BoundaryTag, MeshError> {
        let ts: Vec<f64> = vertices.iter().map(|&v| self.vertex(v)[0]).collect();
        if ts.iter().all(|t| t.abs() <= GEOMETRY_TOL) {
            return Ok(BoundaryTag::Initial);
        }
        if ts.iter().all(|t| (t - self.end_time).abs() <= GEOMETRY_TOL) {
            return Ok(BoundaryTag::Final);
        }
        if ts.iter().all(|t| (t - ts[0]).abs() <= GEOMETRY_TOL) {
            return Err(MeshError::UnclassifiableFacet {
                vertices: vertices.to_vec(),
                t: ts[0],
            });
        }
        Ok(BoundaryTag::Lateral)
    }

    fn facet_multiplicity(&self) -> HashMap<Vec<usize>, (usize, usize)> {
        let nvc = self.vertices_per_cell();
        let mut map: HashMap<Vec<usize>, (usize, usize)> =
            HashMap::with_capacity(self.n_cells() * nvc);
        for c in 0..self.n_cells() {
            let cell = self.cell(c);
            for skip in 0..nvc {
                let mut f: Vec<usize> = (0..nvc).filter(|&k| k != skip).map(|k| cell[k]).collect();
                f.sort_unstable();
                map.entry(f).and_modify(|e| e.0 += 1).or_insert((1, c));
            }
        }
        map
    }

    fn rebuild_boundary(&mut self) -> Result<(), MeshError> {
        let map = self.facet_multiplicity();
        let mut boundary = Vec::new();
        for (f, (count, cell)) in map {
            match count {
                1 => {
                    let tag = self.classify_facet(&f)?;
                    boundary.push(BoundaryFacet {
                        vertices: f,
                        cell,
                        tag,
                    });
                }
                2 => {}
                _ => {
                    return Err(MeshError::Nonconforming(format!(
                        "facet {f:?} shared by {count} cells"
                    )))
                }
            }
        }
        boundary.sort_by(|a, b| a.vertices.cmp(&b.vertices));
        self.boundary = boundary;
        Ok(())
    }

    /// Verifies facet multiplicities and that no vertex lies inside a foreign cell edge.
    pub fn check_conformity(&self) -> Result<(), MeshError> {
        for (f, (count, _)) in self.facet_multiplicity() {
            if count > 2 {
                return Err(MeshError::Nonconforming(format!(
                    "facet {f:?} shared by {count} cells"
                )));
            }
        }
        // a hanging vertex is the midpoint of some cell edge without being a cell vertex
        let mut edges: HashMap<(usize, usize), ()> = HashMap::new();
        let nvc = self.vertices_per_cell();
        for c in 0..self.n_cells() {
            let cell = self.cell(c);
            for a in 0..nvc {
                for b in a + 1..nvc {
                    edges.insert(ordered(cell[a], cell[b]), ());
                }
            }
        }
        for v in 0..self.n_vertices() {
            if let Some([a, b]) = self.parents[v] {
                if edges.contains_key(&ordered(a, b)) {
                    return Err(MeshError::Nonconforming(format!(
                        "vertex {v} hangs on edge ({a}, {b})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Boundary facet counts `(initial, lateral, final)`.
    pub fn boundary_counts(&self) -> (usize, usize, usize) {
        let mut n = (0, 0, 0);
        for f in &self.boundary {
            match f.tag {
                BoundaryTag::Initial => n.0 += 1,
                BoundaryTag::Lateral => n.1 += 1,
                BoundaryTag::Final => n.2 += 1,
            }
        }
        n
    }

    /// Vertices lying on at least one LATERAL facet.
    pub fn lateral_vertices(&self) -> Vec<bool> {
        let mut on = vec![false; self.n_vertices()];
        for f in self.facets_with_tag(BoundaryTag::Lateral) {
            for &v in &f.vertices {
                on[v] = true;
            }
        }
        on
    }

    /// Barycentric coordinates of `p` with respect to cell `c`.
    pub fn barycentric(&self, c: usize, p: &[f64]) -> Vec<f64> {
        let n = self.dim + 1;
        let j = self.cell_jacobian(c);
        let x0 = self.vertex(self.cell(c)[0]);
        let rhs: Vec<f64> = (0..n).map(|r| p[r] - x0[r]).collect();
        let lam = solve_small(&j, &rhs, n);
        let mut out = Vec::with_capacity(n + 1);
        out.push(1.0 - lam.iter().sum::<f64>());
        out.extend(lam);
        out
    }

    /// First cell containing `p` (linear scan).
    pub fn locate(&self, p: &[f64]) -> Option<usize> {
        (0..self.n_cells()).find(|&c| self.barycentric(c, p).iter().all(|&l| l >= -1e-10))
    }

    pub(crate) fn set_refinement_state(
        &mut self,
        generation: Vec<u32>,
        parents: Vec<Option<[usize; 2]>>,
    ) {
        self.generation = generation;
        self.parents = parents;
    }
}

pub(crate) fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn det3(j: &[[f64; 3]; 3]) -> f64 {
    j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1])
        - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
        + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0])
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Solves the leading `n×n` block of `j` (n ≤ 3) by Cramer's rule.
pub(crate) fn solve_small(j: &[[f64; 3]; 3], rhs: &[f64], n: usize) -> Vec<f64> {
    match n {
        1 => vec![rhs[0] / j[0][0]],
        2 => {
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            vec![
                (rhs[0] * j[1][1] - j[0][1] * rhs[1]) / det,
                (j[0][0] * rhs[1] - rhs[0] * j[1][0]) / det,
            ]
        }
        _ => {
            let det = det3(j);
            (0..3)
                .map(|k| {
                    let mut m = *j;
                    for r in 0..3 {
                        m[r][k] = rhs[r];
                    }
                    det3(&m) / det
                })
                .collect()
        }
    }
}

/// Inverse of the leading `n×n` block of `j`.
pub(crate) fn invert_small(j: &[[f64; 3]; 3], n: usize) -> [[f64; 3]; 3] {
    let mut inv = [[0.0; 3]; 3];
    for k in 0..n {
        let mut e = [0.0; 3];
        e[k] = 1.0;
        let col = solve_small(j, &e[..n], n);
        for r in 0..n {
            inv[r][k] = col[r];
        }
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_triangle_square() {
        let m = build_unit_cylinder_mesh(1, "control-init").unwrap();
        assert_eq!((m.n_vertices(), m.n_cells()), (4, 2));
        assert!((m.total_volume() - 1.0).abs() < 1e-15);
        assert_eq!(m.boundary_counts(), (1, 2, 1));
        assert_eq!(m.refinement_edge(0), m.refinement_edge(1));
    }

    #[test]
    fn classification_is_idempotent() {
        let mut m = build_moving_domain_mesh(1).unwrap();
        let before = m.boundary_facets().to_vec();
        m.classify_boundary(1.0).unwrap();
        assert_eq!(before, m.boundary_facets());
    }

    #[test]
    fn interior_time_slice_is_rejected() {
        let coords = vec![0.0, 0.0, 0.5, 0.0, 0.5, 1.0];
        let mut m = SpaceTimeMesh::from_parts(1, 0.5, coords, vec![0, 1, 2], vec![0]).unwrap();
        assert_eq!(m.boundary_counts(), (0, 2, 1));
        assert!(m.classify_boundary(1.0).is_err());
    }
}
