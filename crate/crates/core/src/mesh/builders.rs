use super::{MeshError, SpaceTimeMesh};

/// Permutations of `0..n` in lexicographic order.
fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for first in 0..n {
        for rest in permutations(n - 1) {
            let mut p = vec![first];
            p.extend(rest.into_iter().map(|r| if r >= first { r + 1 } else { r }));
            out.push(p);
        }
    }
    out
}

/// Stack of Kuhn-subdivided boxes between consecutive time levels.
///
/// Level `k` sits at time `levels[k].0`; its spatial cross-section is the unit
/// cube scaled by `levels[k].1` about its centre. Every box is split into
/// `(d+1)!` Kuhn simplices tagged with `γ = 0`, whose refinement edge is the
/// main diagonal.
fn kuhn_stack(d: usize, levels: &[(f64, f64)]) -> Result<SpaceTimeMesh, MeshError> {
    let n = d + 1;
    let corners_per_level = 1usize << d;
    let mut coords = Vec::new();
    for &(t, s) in levels {
        for idx in 0..corners_per_level {
            coords.push(t);
            for k in 0..d {
                let xi = ((idx >> k) & 1) as f64;
                coords.push((xi - 0.5) * s + 0.5);
            }
        }
    }
    // box corner bits: bit 0 is time, bits 1..=d are space
    let vertex = |level: usize, bits: usize| -> usize {
        let lt = level + (bits & 1);
        lt * corners_per_level + (bits >> 1)
    };
    let mut cells = Vec::new();
    let mut tags = Vec::new();
    for level in 0..levels.len() - 1 {
        for perm in permutations(n) {
            let mut bits = 0usize;
            cells.push(vertex(level, bits));
            for &axis in &perm {
                bits |= 1 << axis;
                cells.push(vertex(level, bits));
            }
            tags.push(0);
        }
    }
    let end_time = levels.last().map(|l| l.0).unwrap_or(1.0);
    SpaceTimeMesh::from_parts(d, end_time, coords, cells, tags)
}

/// Initial meshes of the unit space-time cube `(0,1)^(d+1)`.
///
/// `"control-init"`: two triangles split along the diagonal from `(0,0)` to
/// `(1,1)` for `d = 1`; twelve tetrahedra from two stacked Kuhn cubes for `d = 2`.
pub fn build_unit_cylinder_mesh(d: usize, variant: &str) -> Result<SpaceTimeMesh, MeshError> {
    match (d, variant) {
        (1, "control-init") => kuhn_stack(1, &[(0.0, 1.0), (1.0, 1.0)]),
        (2, "control-init") => kuhn_stack(2, &[(0.0, 1.0), (0.5, 1.0), (1.0, 1.0)]),
        _ => Err(MeshError::Unsupported(format!(
            "unit cylinder mesh with d = {d}, variant '{variant}' (available: control-init, d ∈ {{1, 2}})"
        ))),
    }
}

/// Initial meshes of the moving-domain polytopes whose cross-section shrinks
/// to half its width at `t = 1/2` and recovers at `t = 1`.
///
/// `d = 1`: six triangles fanned from `(1/2, 1/2)`, each refining the hexagon
/// edge opposite the centre. `d = 2`: two frustums with six tetrahedra each.
pub fn build_moving_domain_mesh(d: usize) -> Result<SpaceTimeMesh, MeshError> {
    match d {
        1 => {
            #[rustfmt::skip]
            let coords = vec![
                0.0, 0.0,
                0.0, 1.0,
                0.5, 0.25,
                0.5, 0.5,
                0.5, 0.75,
                1.0, 0.0,
                1.0, 1.0,
            ];
            let centre = 3;
            let hexagon = [0, 2, 5, 6, 4, 1];
            let mut cells = Vec::new();
            for k in 0..6 {
                cells.extend([hexagon[k], centre, hexagon[(k + 1) % 6]]);
            }
            SpaceTimeMesh::from_parts(1, 1.0, coords, cells, vec![0; 6])
        }
        2 => kuhn_stack(2, &[(0.0, 1.0), (0.5, 0.5), (1.0, 1.0)]),
        _ => Err(MeshError::Unsupported(format!(
            "moving-domain mesh with d = {d}"
        ))),
    }
}
