use std::collections::HashMap;

use super::{ordered, MeshError, SpaceTimeMesh};

/// Bound on nested closure refinements before declaring the tags incompatible.
const MAX_CLOSURE_DEPTH: usize = 64;

struct Refiner {
    dim: usize,
    n: usize,
    coords: Vec<f64>,
    parents: Vec<Option<[usize; 2]>>,
    cells: Vec<Vec<usize>>,
    tags: Vec<u8>,
    generation: Vec<u32>,
    target: Vec<u32>,
    alive: Vec<bool>,
    edge_cells: HashMap<(usize, usize), Vec<usize>>,
    pending: Vec<usize>,
}

impl Refiner {
    fn new(mesh: &SpaceTimeMesh, extra_generations: u32) -> Self {
        let nc = mesh.n_cells();
        let mut r = Self {
            dim: mesh.dim,
            n: mesh.dim + 1,
            coords: mesh.coords.clone(),
            parents: mesh.parents.clone(),
            cells: Vec::with_capacity(nc * 4),
            tags: Vec::with_capacity(nc * 4),
            generation: Vec::with_capacity(nc * 4),
            target: Vec::with_capacity(nc * 4),
            alive: Vec::with_capacity(nc * 4),
            edge_cells: HashMap::with_capacity(nc * 4),
            pending: Vec::new(),
        };
        for c in 0..nc {
            let g = mesh.generation[c];
            r.push_cell(
                mesh.cell(c).to_vec(),
                mesh.tags[c],
                g,
                g + extra_generations,
            );
        }
        r.pending = (0..nc).rev().collect();
        r
    }

    fn push_cell(&mut self, verts: Vec<usize>, tag: u8, generation: u32, target: u32) -> usize {
        let id = self.cells.len();
        for a in 0..verts.len() {
            for b in a + 1..verts.len() {
                self.edge_cells
                    .entry(ordered(verts[a], verts[b]))
                    .or_default()
                    .push(id);
            }
        }
        self.cells.push(verts);
        self.tags.push(tag);
        self.generation.push(generation);
        self.target.push(target);
        self.alive.push(true);
        id
    }

    fn kill(&mut self, id: usize) {
        self.alive[id] = false;
        let verts = self.cells[id].clone();
        for a in 0..verts.len() {
            for b in a + 1..verts.len() {
                if let Some(list) = self.edge_cells.get_mut(&ordered(verts[a], verts[b])) {
                    list.retain(|&c| c != id);
                }
            }
        }
    }

    fn refinement_edge(&self, id: usize) -> (usize, usize) {
        let v = &self.cells[id];
        ordered(v[0], v[self.n])
    }

    fn run(&mut self) -> Result<(), MeshError> {
        while let Some(c) = self.pending.pop() {
            if self.alive[c] && self.generation[c] < self.target[c] {
                let e = self.refinement_edge(c);
                self.bisect_edge(e, 0)?;
            }
        }
        Ok(())
    }

    /// Bisects every cell sharing edge `e`, first refining neighbours whose
    /// refinement edge differs until the whole patch agrees on `e`.
    fn bisect_edge(&mut self, e: (usize, usize), depth: usize) -> Result<(), MeshError> {
        if depth > MAX_CLOSURE_DEPTH {
            return Err(MeshError::IncompatibleTags(e.0, e.1));
        }
        loop {
            let patch = self.edge_cells.get(&e).cloned().unwrap_or_default();
            match patch.iter().find(|&&k| self.refinement_edge(k) != e) {
                Some(&k) => {
                    let ek = self.refinement_edge(k);
                    self.bisect_edge(ek, depth + 1)?;
                }
                None => break,
            }
        }
        let patch = self.edge_cells.get(&e).cloned().unwrap_or_default();
        if patch.is_empty() {
            return Ok(());
        }
        let s = self.dim + 1;
        let mid = self.coords.len() / s;
        for k in 0..s {
            let v = 0.5 * (self.coords[e.0 * s + k] + self.coords[e.1 * s + k]);
            self.coords.push(v);
        }
        self.parents.push(Some([e.0, e.1]));
        for k in patch {
            self.bisect_cell(k, mid);
        }
        Ok(())
    }

    /// Tagged bisection of `(x₀, …, x_n)_γ` with midpoint `z` of `x₀x_n`:
    /// children `(x₀, z, x₁, …, x_γ, x_{γ+1}, …, x_{n−1})` and
    /// `(x_n, z, x₁, …, x_γ, x_{n−1}, …, x_{γ+1})`, both of type `(γ+1) mod n`.
    fn bisect_cell(&mut self, id: usize, z: usize) {
        let n = self.n;
        let x = self.cells[id].clone();
        let gamma = self.tags[id] as usize;
        let tag = ((gamma + 1) % n) as u8;
        let generation = self.generation[id] + 1;
        let target = self.target[id];

        let mut first = Vec::with_capacity(n + 1);
        first.push(x[0]);
        first.push(z);
        first.extend_from_slice(&x[1..n]);

        let mut second = Vec::with_capacity(n + 1);
        second.push(x[n]);
        second.push(z);
        second.extend_from_slice(&x[1..=gamma]);
        second.extend(x[gamma + 1..n].iter().rev());

        self.kill(id);
        let a = self.push_cell(first, tag, generation, target);
        let b = self.push_cell(second, tag, generation, target);
        self.pending.push(b);
        self.pending.push(a);
    }

    fn finish(self, end_time: f64) -> Result<SpaceTimeMesh, MeshError> {
        let mut cells = Vec::new();
        let mut tags = Vec::new();
        let mut generation = Vec::new();
        for id in 0..self.cells.len() {
            if self.alive[id] {
                cells.extend_from_slice(&self.cells[id]);
                tags.push(self.tags[id]);
                generation.push(self.generation[id]);
            }
        }
        let mut mesh = SpaceTimeMesh::from_parts(self.dim, end_time, self.coords, cells, tags)?;
        mesh.set_refinement_state(generation, self.parents);
        Ok(mesh)
    }
}

impl SpaceTimeMesh {
    /// One uniform refinement: `d+1` generations of tagged newest-vertex
    /// bisection per cell, with conforming closure.
    pub fn refine_uniform(&self) -> Result<SpaceTimeMesh, MeshError> {
        let mut r = Refiner::new(self, (self.dim + 1) as u32);
        r.run()?;
        r.finish(self.end_time)
    }

    /// Applies `refine_uniform` `levels` times.
    pub fn refine_uniform_times(&self, levels: usize) -> Result<SpaceTimeMesh, MeshError> {
        let mut m = self.clone();
        for _ in 0..levels {
            m = m.refine_uniform()?;
        }
        Ok(m)
    }

    /// Prolongates nodal P1 values to a mesh obtained from this one by
    /// refinement, using the recorded vertex parents.
    pub fn prolongate_p1(fine: &SpaceTimeMesh, coarse_values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; fine.n_vertices()];
        out[..coarse_values.len()].copy_from_slice(coarse_values);
        for v in coarse_values.len()..fine.n_vertices() {
            let [a, b] = fine.parents[v].expect("refined vertex without parents");
            out[v] = 0.5 * (out[a] + out[b]);
        }
        out
    }
}
