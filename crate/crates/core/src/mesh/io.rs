use std::fmt::Write as _;
use std::io::{BufRead, Write};

use super::{BoundaryTag, MeshError, SpaceTimeMesh};

impl SpaceTimeMesh {
    /// Plain-text export: header `dim nv nc nbf`, then vertex lines, cell
    /// lines (vertex indices followed by the refinement tag) and boundary
    /// facet lines (vertex indices followed by the tag name).
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<(), MeshError> {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} {} {} {}",
            self.dim,
            self.n_vertices(),
            self.n_cells(),
            self.boundary.len()
        );
        for v in 0..self.n_vertices() {
            let line: Vec<String> = self.vertex(v).iter().map(|x| format!("{x:e}")).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        for c in 0..self.n_cells() {
            let line: Vec<String> = self.cell(c).iter().map(|x| x.to_string()).collect();
            let _ = writeln!(s, "{} {}", line.join(" "), self.tags[c]);
        }
        for f in &self.boundary {
            let line: Vec<String> = f.vertices.iter().map(|x| x.to_string()).collect();
            let _ = writeln!(s, "{} {}", line.join(" "), f.tag);
        }
        out.write_all(s.as_bytes())?;
        Ok(())
    }

    /// Reads the format of [`SpaceTimeMesh::write_text`]. The end time is the
    /// largest vertex time; boundary tags in the file must match the
    /// recomputed classification.
    pub fn read_text<R: BufRead>(input: R) -> Result<SpaceTimeMesh, MeshError> {
        let mut lines = input.lines();
        let mut next = || -> Result<Vec<String>, MeshError> {
            loop {
                match lines.next() {
                    Some(l) => {
                        let l = l?;
                        let toks: Vec<String> = l.split_whitespace().map(str::to_string).collect();
                        if !toks.is_empty() {
                            return Ok(toks);
                        }
                    }
                    None => return Err(MeshError::Parse("unexpected end of file".into())),
                }
            }
        };
        let num = |t: &str| -> Result<usize, MeshError> {
            t.parse::<usize>()
                .map_err(|e| MeshError::Parse(format!("'{t}': {e}")))
        };
        let header = next()?;
        if header.len() != 4 {
            return Err(MeshError::Parse("header must be 'dim nv nc nbf'".into()));
        }
        let (dim, nv, nc, nbf) = (
            num(&header[0])?,
            num(&header[1])?,
            num(&header[2])?,
            num(&header[3])?,
        );
        let mut coords = Vec::with_capacity(nv * (dim + 1));
        for _ in 0..nv {
            let toks = next()?;
            if toks.len() != dim + 1 {
                return Err(MeshError::Parse(format!(
                    "vertex line with {} entries",
                    toks.len()
                )));
            }
            for t in toks {
                coords.push(
                    t.parse::<f64>()
                        .map_err(|e| MeshError::Parse(format!("'{t}': {e}")))?,
                );
            }
        }
        let mut cells = Vec::with_capacity(nc * (dim + 2));
        let mut tags = Vec::with_capacity(nc);
        for _ in 0..nc {
            let toks = next()?;
            if toks.len() != dim + 3 {
                return Err(MeshError::Parse(format!(
                    "cell line with {} entries",
                    toks.len()
                )));
            }
            for t in &toks[..dim + 2] {
                cells.push(num(t)?);
            }
            tags.push(num(&toks[dim + 2])? as u8);
        }
        let mut facets = Vec::with_capacity(nbf);
        for _ in 0..nbf {
            let toks = next()?;
            let tag = toks
                .last()
                .and_then(|t| BoundaryTag::parse(t))
                .ok_or_else(|| MeshError::Parse("boundary facet without tag".into()))?;
            let mut verts = toks[..toks.len() - 1]
                .iter()
                .map(|t| num(t))
                .collect::<Result<Vec<_>, _>>()?;
            verts.sort_unstable();
            facets.push((verts, tag));
        }
        let end_time = coords
            .chunks(dim + 1)
            .map(|p| p[0])
            .fold(f64::NEG_INFINITY, f64::max);
        let mesh = SpaceTimeMesh::from_parts(dim, end_time, coords, cells, tags)?;
        if facets.len() != mesh.boundary.len()
            || facets
                .iter()
                .zip(&mesh.boundary)
                .any(|((v, t), f)| *v != f.vertices || *t != f.tag)
        {
            return Err(MeshError::Parse(
                "boundary facets disagree with the cells".into(),
            ));
        }
        Ok(mesh)
    }
}
