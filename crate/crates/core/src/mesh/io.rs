use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{BoundaryMarker, MeshError, PolygonalMesh};
use crate::Vec2;

/// Writes the `POLYMESH 1` text format. The boundary block lists only the
/// edges whose marker differs from the Dirichlet default.
pub fn write_mesh<W: Write>(mesh: &PolygonalMesh, mut w: W) -> std::io::Result<()> {
    writeln!(w, "POLYMESH 1")?;
    writeln!(w, "{} {}", mesh.num_vertices(), mesh.num_cells())?;
    for v in mesh.vertices() {
        writeln!(w, "{:.16e} {:.16e}", v.x, v.y)?;
    }
    for cell in mesh.cells() {
        write!(w, "{}", cell.len())?;
        for v in cell {
            write!(w, " {v}")?;
        }
        writeln!(w)?;
    }
    let neumann: Vec<_> = mesh.edges().iter().filter(|e| e.boundary == Some(BoundaryMarker::Neumann)).collect();
    if !neumann.is_empty() {
        writeln!(w, "BOUNDARY {}", neumann.len())?;
        for e in neumann {
            writeln!(w, "{} {} N", e.vertices[0], e.vertices[1])?;
        }
    }
    Ok(())
}

pub fn write_mesh_file(mesh: &PolygonalMesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_mesh(mesh, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_mesh_file(path: impl AsRef<Path>) -> Result<PolygonalMesh, MeshError> {
    read_mesh(std::fs::File::open(path)?)
}

struct Lines<R: BufRead> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    /// Next non-empty line, split into tokens.
    fn next_tokens(&mut self) -> Result<Option<Vec<String>>, MeshError> {
        for l in self.inner.by_ref() {
            self.line += 1;
            let l = l?;
            let toks: Vec<String> = l.split_whitespace().map(str::to_owned).collect();
            if !toks.is_empty() {
                return Ok(Some(toks));
            }
        }
        Ok(None)
    }

    fn expect_tokens(&mut self, what: &str) -> Result<Vec<String>, MeshError> {
        self.next_tokens()?.ok_or_else(|| self.err(format!("unexpected end of file, expected {what}")))
    }

    fn err(&self, message: String) -> MeshError {
        MeshError::Parse { line: self.line, message }
    }

    fn parse<T: std::str::FromStr>(&self, tok: &str, what: &str) -> Result<T, MeshError> {
        tok.parse().map_err(|_| self.err(format!("cannot parse {what} from '{tok}'")))
    }
}

pub fn read_mesh<R: Read>(r: R) -> Result<PolygonalMesh, MeshError> {
    let mut lines = Lines { inner: BufReader::new(r).lines(), line: 0 };
    let header = lines.expect_tokens("header")?;
    if header.len() != 2 || header[0] != "POLYMESH" || header[1] != "1" {
        return Err(lines.err("expected 'POLYMESH 1'".into()));
    }
    let counts = lines.expect_tokens("vertex and cell counts")?;
    if counts.len() != 2 {
        return Err(lines.err("expected '<nv> <nc>'".into()));
    }
    let nv: usize = lines.parse(&counts[0], "vertex count")?;
    let nc: usize = lines.parse(&counts[1], "cell count")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let t = lines.expect_tokens("vertex coordinates")?;
        if t.len() != 2 {
            return Err(lines.err("expected 'x y'".into()));
        }
        let x: f64 = lines.parse(&t[0], "x")?;
        let y: f64 = lines.parse(&t[1], "y")?;
        if !x.is_finite() || !y.is_finite() {
            return Err(lines.err("non-finite coordinate".into()));
        }
        vertices.push(Vec2::new(x, y));
    }
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let t = lines.expect_tokens("cell")?;
        let m: usize = lines.parse(&t[0], "cell size")?;
        if t.len() != m + 1 {
            return Err(lines.err(format!("cell declares {m} vertices but lists {}", t.len() - 1)));
        }
        let cell = t[1..].iter().map(|s| lines.parse(s, "vertex index")).collect::<Result<Vec<usize>, _>>()?;
        cells.push(cell);
    }
    let mut overrides = Vec::new();
    if let Some(t) = lines.next_tokens()? {
        if t.len() != 2 || t[0] != "BOUNDARY" {
            return Err(lines.err("expected 'BOUNDARY <ne>' or end of file".into()));
        }
        let ne: usize = lines.parse(&t[1], "boundary edge count")?;
        for _ in 0..ne {
            let t = lines.expect_tokens("boundary edge")?;
            if t.len() != 3 {
                return Err(lines.err("expected 'v_a v_b D|N'".into()));
            }
            let a: usize = lines.parse(&t[0], "vertex index")?;
            let b: usize = lines.parse(&t[1], "vertex index")?;
            let marker = match t[2].as_str() {
                "D" => BoundaryMarker::Dirichlet,
                "N" => BoundaryMarker::Neumann,
                other => return Err(lines.err(format!("unknown boundary marker '{other}'"))),
            };
            overrides.push((lines.line, a, b, marker));
        }
        if lines.next_tokens()?.is_some() {
            return Err(lines.err("trailing content after boundary block".into()));
        }
    }
    let mut mesh = PolygonalMesh::new(vertices, cells)?;
    for (line, a, b, marker) in overrides {
        mesh.set_boundary_marker(a, b, marker).map_err(|e| MeshError::Parse { line, message: e.to_string() })?;
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_nonconvex_octagons, generate_voronoi};

    fn roundtrip(mesh: &PolygonalMesh) -> PolygonalMesh {
        let mut buf = Vec::new();
        write_mesh(mesh, &mut buf).unwrap();
        read_mesh(buf.as_slice()).unwrap()
    }

    #[test]
    fn roundtrip_preserves_mesh_exactly() {
        let mut m = generate_voronoi(40, 3, 2).unwrap().mesh;
        m.mark_boundary_where(BoundaryMarker::Neumann, |p| p.y > 1.0 - 1e-12);
        let back = roundtrip(&m);
        assert_eq!(back, m);
        let mut again = Vec::new();
        write_mesh(&back, &mut again).unwrap();
        let mut first = Vec::new();
        write_mesh(&m, &mut first).unwrap();
        assert_eq!(first, again);
        let oct = generate_nonconvex_octagons(1).unwrap();
        assert_eq!(roundtrip(&oct), oct);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = "POLYMESH 1\n3 1\n0 0\n1 0\n0 x\n3 0 1 2\n";
        match read_mesh(bad.as_bytes()) {
            Err(MeshError::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
        assert!(read_mesh("POLYMESH 2\n".as_bytes()).is_err());
        let interior = "POLYMESH 1\n4 2\n0 0\n1 0\n1 1\n0 1\n3 0 1 2\n3 0 2 3\nBOUNDARY 1\n0 2 N\n";
        assert!(read_mesh(interior.as_bytes()).is_err());
    }
}
