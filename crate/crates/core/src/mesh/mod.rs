//! Polygonal meshes of planar domains.
//!
//! Cells are stored as counterclockwise vertex cycles. Every edge carries a
//! canonical orientation (from its smaller to its larger vertex id) so that
//! edge-based degrees of freedom and normals are shared consistently by the
//! two cells adjacent to an interior edge.

mod generators;
mod io;
mod polygon;
mod regularity;

use std::collections::HashMap;

pub use generators::{
    generate_hexagonal, generate_hexagonal_distorted, generate_nonconvex_octagons, generate_randomized_quads,
    generate_structured_quads, generate_voronoi, RandomizedQuads, VoronoiMesh, DEFAULT_HEX_DISTORTION, DEFAULT_QUAD_JITTER,
};
pub use io::{read_mesh, read_mesh_file, write_mesh, write_mesh_file};
pub use polygon::Polygon;
pub use regularity::{check_regularity, CellRegularity, RegularityReport};

use crate::Vec2;

#[derive(Debug, thiserror::Error)]
pub enum MeshError {
    #[error("invalid generator parameter: {0}")]
    InvalidParameter(String),
    #[error("cell {cell} has {count} vertices, at least 3 are required")]
    TooFewVertices { cell: usize, count: usize },
    #[error("cell {cell} references vertex {vertex}, but the mesh has {nv} vertices")]
    VertexOutOfRange { cell: usize, vertex: usize, nv: usize },
    #[error("cell {cell} has non-positive signed area {area:e}")]
    NonPositiveArea { cell: usize, area: f64 },
    #[error("cell {cell} is not a simple polygon")]
    SelfIntersecting { cell: usize },
    #[error("edge ({a}, {b}) is traversed twice in the same direction or shared by more than two cells")]
    NonManifoldEdge { a: usize, b: usize },
    #[error("vertex {0} is not used by any cell")]
    UnusedVertex(usize),
    #[error("boundary marker refers to ({a}, {b}), which is not a boundary edge")]
    NotABoundaryEdge { a: usize, b: usize },
    #[error("randomized mesh still inverted after {attempts} attempts")]
    TooManyAttempts { attempts: usize },
    #[error("mesh file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Boundary condition type attached to a boundary edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryMarker {
    Dirichlet,
    Neumann,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    /// Canonical orientation: `vertices[0] < vertices[1]`.
    pub vertices: [usize; 2],
    /// `cells[0]` traverses the edge in canonical direction (the cell lies to
    /// its left), `cells[1]` traverses it backwards.
    pub cells: [Option<usize>; 2],
    pub boundary: Option<BoundaryMarker>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.boundary.is_some()
    }
}

#[derive(Clone, Debug)]
pub struct PolygonalMesh {
    vertices: Vec<Vec2>,
    cells: Vec<Vec<usize>>,
    edges: Vec<Edge>,
    cell_edges: Vec<Vec<usize>>,
    edge_lookup: HashMap<(usize, usize), usize>,
    vertex_h: Vec<f64>,
    boundary_vertex: Vec<bool>,
    polygons: Vec<Polygon>,
}

impl PartialEq for PolygonalMesh {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.cells == other.cells && self.edges == other.edges
    }
}

impl PolygonalMesh {
    /// Builds and validates a mesh from counterclockwise cell cycles. All
    /// boundary edges are marked Dirichlet.
    pub fn new(vertices: Vec<Vec2>, cells: Vec<Vec<usize>>) -> Result<Self, MeshError> {
        let nv = vertices.len();
        let mut used = vec![false; nv];
        for (c, cell) in cells.iter().enumerate() {
            if cell.len() < 3 {
                return Err(MeshError::TooFewVertices { cell: c, count: cell.len() });
            }
            for &v in cell {
                if v >= nv {
                    return Err(MeshError::VertexOutOfRange { cell: c, vertex: v, nv });
                }
                used[v] = true;
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(MeshError::UnusedVertex(v));
        }

        let mut edges: Vec<Edge> = Vec::new();
        let mut edge_lookup = HashMap::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            let n = cell.len();
            let mut local = Vec::with_capacity(n);
            for i in 0..n {
                let (a, b) = (cell[i], cell[(i + 1) % n]);
                if a == b {
                    return Err(MeshError::SelfIntersecting { cell: c });
                }
                let key = (a.min(b), a.max(b));
                let slot = usize::from(a > b);
                let id = *edge_lookup.entry(key).or_insert_with(|| {
                    edges.push(Edge { vertices: [key.0, key.1], cells: [None, None], boundary: None });
                    edges.len() - 1
                });
                if edges[id].cells[slot].is_some() {
                    return Err(MeshError::NonManifoldEdge { a: key.0, b: key.1 });
                }
                edges[id].cells[slot] = Some(c);
                local.push(id);
            }
            cell_edges.push(local);
        }
        let mut boundary_vertex = vec![false; nv];
        for e in edges.iter_mut() {
            if e.cells[0].is_none() || e.cells[1].is_none() {
                e.boundary = Some(BoundaryMarker::Dirichlet);
                boundary_vertex[e.vertices[0]] = true;
                boundary_vertex[e.vertices[1]] = true;
            }
        }

        // Geometry first with provisional scales, then the vertex scales.
        let mut polygons = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            let pts: Vec<Vec2> = cell.iter().map(|&v| vertices[v]).collect();
            let poly = Polygon::new(pts).map_err(|e| match e {
                MeshError::NonPositiveArea { area, .. } => MeshError::NonPositiveArea { cell: c, area },
                MeshError::SelfIntersecting { .. } => MeshError::SelfIntersecting { cell: c },
                other => other,
            })?;
            polygons.push(poly);
        }
        let mut sum = vec![0.0; nv];
        let mut count = vec![0usize; nv];
        for (cell, poly) in cells.iter().zip(&polygons) {
            for &v in cell {
                sum[v] += poly.diameter();
                count[v] += 1;
            }
        }
        let vertex_h: Vec<f64> = sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect();
        for (c, poly) in polygons.iter_mut().enumerate() {
            let cell = &cells[c];
            let scales = cell.iter().map(|&v| vertex_h[v]).collect();
            let flips = cell_edges[c].iter().enumerate().map(|(i, &e)| edges[e].vertices[0] != cell[i]).collect();
            *poly = poly.clone().with_vertex_scales(scales).with_edge_flips(flips);
        }

        Ok(Self { vertices, cells, edges, cell_edges, edge_lookup, vertex_h, boundary_vertex, polygons })
    }

    /// Overrides the marker of boundary edge `(a, b)` (either orientation).
    pub fn set_boundary_marker(&mut self, a: usize, b: usize, marker: BoundaryMarker) -> Result<(), MeshError> {
        match self.edge_lookup.get(&(a.min(b), a.max(b))) {
            Some(&id) if self.edges[id].is_boundary() => {
                self.edges[id].boundary = Some(marker);
                Ok(())
            }
            _ => Err(MeshError::NotABoundaryEdge { a, b }),
        }
    }

    /// Marks every boundary edge whose midpoint satisfies `select`.
    pub fn mark_boundary_where(&mut self, marker: BoundaryMarker, select: impl Fn(Vec2) -> bool) {
        for e in self.edges.iter_mut().filter(|e| e.is_boundary()) {
            let mid = 0.5 * (self.vertices[e.vertices[0]] + self.vertices[e.vertices[1]]);
            if select(mid) {
                e.boundary = Some(marker);
            }
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Vec2 {
        self.vertices[v]
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn cell_vertices(&self, c: usize) -> &[usize] {
        &self.cells[c]
    }

    /// Global edge ids of the local edges of cell `c`; local edge `i` runs
    /// from local vertex `i` to `i + 1`.
    pub fn cell_edges(&self, c: usize) -> &[usize] {
        &self.cell_edges[c]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn find_edge(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_lookup.get(&(a.min(b), a.max(b))).copied()
    }

    /// Characteristic length of a vertex: the mean diameter of its cells.
    pub fn vertex_h(&self, v: usize) -> f64 {
        self.vertex_h[v]
    }

    /// Multiplies every vertex length (mesh-wide and per cell) by `factor`.
    pub fn scale_vertex_h(&mut self, factor: f64) {
        for h in &mut self.vertex_h {
            *h *= factor;
        }
        for (c, poly) in self.polygons.iter_mut().enumerate() {
            let scales = self.cells[c].iter().map(|&v| self.vertex_h[v]).collect();
            *poly = poly.clone().with_vertex_scales(scales);
        }
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    /// Geometry of cell `c`, including vertex scales and edge orientations.
    pub fn cell(&self, c: usize) -> &Polygon {
        &self.polygons[c]
    }

    pub fn polygons(&self) -> &[Polygon] {
        &self.polygons
    }

    pub fn total_area(&self) -> f64 {
        self.polygons.iter().map(Polygon::area).sum()
    }

    pub fn max_diameter(&self) -> f64 {
        self.polygons.iter().map(Polygon::diameter).fold(0.0, f64::max)
    }

    pub fn mean_diameter(&self) -> f64 {
        self.polygons.iter().map(Polygon::diameter).sum::<f64>() / self.num_cells() as f64
    }

    pub fn min_edge_length(&self) -> f64 {
        self.edges
            .iter()
            .map(|e| (self.vertices[e.vertices[1]] - self.vertices[e.vertices[0]]).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Outward unit normal of a boundary edge.
    pub fn boundary_normal(&self, e: usize) -> Option<Vec2> {
        let edge = &self.edges[e];
        let (a, b) = (self.vertices[edge.vertices[0]], self.vertices[edge.vertices[1]]);
        let t = (b - a).normalize();
        match edge.cells {
            [Some(_), None] => Some(Vec2::new(t.y, -t.x)),
            [None, Some(_)] => Some(Vec2::new(-t.y, t.x)),
            _ => None,
        }
    }
}
