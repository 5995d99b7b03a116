use nalgebra::DVector;
use rayon::prelude::*;

use super::{PolyOrder, PolyharmonicLocalSpace};
use crate::convergence::ConvergenceTable;
use crate::field::ScalarField;
use crate::la_core::{assemble, DofPartition, SparseCholesky, SparseMatrix, Triplets};
use crate::mesh::{BoundaryMarker, PolygonalMesh};
use crate::poly_basis::{edge_quadrature, legendre_values, polygon_quadrature};
use crate::{Error, Result, Vec2};

const DATA_QUAD_EXTRA: usize = 10;

/// Global numbering: vertex DOFs, then edge DOFs, then interior DOFs.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyDofMap {
    order: PolyOrder,
    n_vertices: usize,
    n_edges: usize,
    n_dofs: usize,
    cell_dofs: Vec<Vec<usize>>,
}

impl PolyDofMap {
    pub fn new(mesh: &PolygonalMesh, order: PolyOrder) -> Self {
        let (nvd, ned, ni) = (order.vertex_dofs(), order.edge_dofs(), order.interior_dofs());
        let (nv, ne) = (mesh.num_vertices(), mesh.num_edges());
        let cell_dofs = (0..mesh.num_cells())
            .map(|c| {
                let mut d = Vec::new();
                for &v in mesh.cell_vertices(c) {
                    d.extend((0..nvd).map(|m| v * nvd + m));
                }
                for &e in mesh.cell_edges(c) {
                    d.extend((0..ned).map(|j| nv * nvd + e * ned + j));
                }
                d.extend((0..ni).map(|b| nv * nvd + ne * ned + c * ni + b));
                d
            })
            .collect();
        Self { order, n_vertices: nv, n_edges: ne, n_dofs: nv * nvd + ne * ned + mesh.num_cells() * ni, cell_dofs }
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn cell_dofs(&self, c: usize) -> &[usize] {
        &self.cell_dofs[c]
    }

    pub fn vertex_dof(&self, v: usize, m: usize) -> usize {
        v * self.order.vertex_dofs() + m
    }

    pub fn edge_dof(&self, e: usize, j: usize) -> usize {
        self.n_vertices * self.order.vertex_dofs() + e * self.order.edge_dofs() + j
    }

    pub fn interior_dof(&self, c: usize, b: usize) -> usize {
        let base = self.n_vertices * self.order.vertex_dofs() + self.n_edges * self.order.edge_dofs();
        base + c * self.order.interior_dofs() + b
    }

    /// Clamped DOFs: everything attached to Dirichlet edges and their vertices.
    pub fn clamped_mask(&self, mesh: &PolygonalMesh) -> Vec<bool> {
        let mut mask = vec![false; self.n_dofs];
        for (e, edge) in mesh.edges().iter().enumerate() {
            if edge.boundary != Some(BoundaryMarker::Dirichlet) {
                continue;
            }
            for &v in &edge.vertices {
                for m in 0..self.order.vertex_dofs() {
                    mask[self.vertex_dof(v, m)] = true;
                }
            }
            for j in 0..self.order.edge_dofs() {
                mask[self.edge_dof(e, j)] = true;
            }
        }
        mask
    }
}

#[derive(Clone, Debug)]
pub struct PolyDiscretization {
    order: PolyOrder,
    dofs: PolyDofMap,
    spaces: Vec<PolyharmonicLocalSpace>,
}

/// Broken errors of `u - Pi u_h`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolyErrors {
    pub l2: f64,
    pub h1: f64,
    /// Present for p = 2.
    pub h2: Option<f64>,
}

impl PolyErrors {
    /// Error in the energy seminorm |.|_p.
    pub fn energy(&self) -> f64 {
        self.h2.unwrap_or(self.h1)
    }
}

impl PolyDiscretization {
    pub fn new(mesh: &PolygonalMesh, p: usize, r: usize) -> Result<Self> {
        let order = PolyOrder::new(p, r)?;
        let spaces = mesh
            .polygons()
            .par_iter()
            .enumerate()
            .map(|(c, cell)| {
                PolyharmonicLocalSpace::new(cell, p, r).map_err(|e| match e {
                    Error::RankDeficient { diameter, .. } => Error::RankDeficient { cell: c, diameter },
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { order, dofs: PolyDofMap::new(mesh, order), spaces })
    }

    pub fn order(&self) -> PolyOrder {
        self.order
    }

    pub fn dofs(&self) -> &PolyDofMap {
        &self.dofs
    }

    pub fn n_dofs(&self) -> usize {
        self.dofs.n_dofs()
    }

    pub fn spaces(&self) -> &[PolyharmonicLocalSpace] {
        &self.spaces
    }

    pub fn space(&self, c: usize) -> &PolyharmonicLocalSpace {
        &self.spaces[c]
    }

    pub fn local_values(&self, c: usize, u: &DVector<f64>) -> DVector<f64> {
        let d = self.dofs.cell_dofs(c);
        DVector::from_iterator(d.len(), d.iter().map(|&i| u[i]))
    }

    pub fn matrix(&self) -> SparseMatrix {
        let locals: Vec<_> = self.spaces.par_iter().map(|s| s.local_matrix()).collect();
        let mut t = Triplets::new();
        for (c, local) in locals.iter().enumerate() {
            let d: Vec<Option<usize>> = self.dofs.cell_dofs(c).iter().map(|&i| Some(i)).collect();
            t.add_block(&d, &d, local);
        }
        assemble(&t, self.n_dofs()).expect("local indices are in range")
    }

    pub fn load(&self, f: impl Fn(Vec2) -> f64 + Sync) -> DVector<f64> {
        let deg = 2 * self.order.r + DATA_QUAD_EXTRA;
        let locals: Vec<_> = self.spaces.par_iter().map(|s| s.load_vector(&f, deg)).collect();
        let mut b = DVector::zeros(self.n_dofs());
        for (c, local) in locals.iter().enumerate() {
            for (i, &d) in self.dofs.cell_dofs(c).iter().enumerate() {
                b[d] += local[i];
            }
        }
        b
    }

    /// DOF interpolant of a smooth field.
    pub fn interpolate(&self, mesh: &PolygonalMesh, f: &dyn ScalarField) -> DVector<f64> {
        let PolyOrder { p, r } = self.order;
        let mut u = DVector::zeros(self.n_dofs());
        for (v, &x) in mesh.vertices().iter().enumerate() {
            u[self.dofs.vertex_dof(v, 0)] = f.value(x);
            if p == 2 {
                let g = mesh.vertex_h(v) * f.gradient(x);
                u[self.dofs.vertex_dof(v, 1)] = g.x;
                u[self.dofs.vertex_dof(v, 2)] = g.y;
            }
        }
        let (nm, nn) = (self.order.value_moments(), self.order.normal_moments());
        for (e, edge) in mesh.edges().iter().enumerate() {
            let (a, b) = (mesh.vertex(edge.vertices[0]), mesh.vertex(edge.vertices[1]));
            let len = (b - a).norm();
            let t = (b - a) / len;
            let nc = Vec2::new(t.y, -t.x);
            let rule = edge_quadrature(a, b, 2 * r + DATA_QUAD_EXTRA);
            for (q, (&x, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                let leg = legendre_values(r, 2.0 * rule.params[q]);
                for j in 0..nm {
                    u[self.dofs.edge_dof(e, j)] += w / len * f.value(x) * leg[j];
                }
                if nn > 0 {
                    let dn = f.gradient(x).dot(&nc);
                    for j in 0..nn {
                        u[self.dofs.edge_dof(e, nm + j)] += w * dn * leg[j];
                    }
                }
            }
        }
        for (c, s) in self.spaces.iter().enumerate() {
            let ni = self.order.interior_dofs();
            if ni == 0 {
                continue;
            }
            let quad = polygon_quadrature(s.cell(), 2 * r + DATA_QUAD_EXTRA).expect("cell quadrature");
            let hp2 = s.cell().diameter().powi(2);
            for (&x, &w) in quad.points.iter().zip(&quad.weights) {
                let q = s.basis().eval(x);
                for b in 0..ni {
                    u[self.dofs.interior_dof(c, b)] += w * f.value(x) * q[b] / hp2;
                }
            }
        }
        u
    }

    pub fn errors(&self, u: &DVector<f64>, exact: &dyn ScalarField) -> PolyErrors {
        let r = self.order.r;
        let (l2, h1, h2) = self
            .spaces
            .par_iter()
            .enumerate()
            .map(|(c, s)| {
                let coef = s.projector() * self.local_values(c, u);
                let quad = polygon_quadrature(s.cell(), 2 * r + DATA_QUAD_EXTRA).expect("cell quadrature");
                let b = s.basis();
                let (mut l2, mut h1, mut h2) = (0.0, 0.0, 0.0);
                for (&x, &w) in quad.points.iter().zip(&quad.weights) {
                    let e0 = exact.value(x) - b.eval(x).dot(&coef);
                    let g = Vec2::new(b.derivative((1, 0), x).dot(&coef), b.derivative((0, 1), x).dot(&coef));
                    let e1 = exact.gradient(x) - g;
                    let hx = exact.hessian(x);
                    let (xx, xy, yy) = (
                        b.derivative((2, 0), x).dot(&coef),
                        b.derivative((1, 1), x).dot(&coef),
                        b.derivative((0, 2), x).dot(&coef),
                    );
                    let e2 = (hx[(0, 0)] - xx).powi(2) + 2.0 * (hx[(0, 1)] - xy).powi(2) + (hx[(1, 1)] - yy).powi(2);
                    l2 += w * e0 * e0;
                    h1 += w * e1.norm_squared();
                    h2 += w * e2;
                }
                (l2, h1, h2)
            })
            .reduce(|| (0.0, 0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
        PolyErrors { l2: l2.sqrt(), h1: h1.sqrt(), h2: (self.order.p == 2).then(|| h2.sqrt()) }
    }
}

#[derive(Clone, Debug)]
pub struct PolySolution {
    pub discretization: PolyDiscretization,
    pub u: DVector<f64>,
}

impl PolySolution {
    pub fn errors(&self, exact: &dyn ScalarField) -> PolyErrors {
        self.discretization.errors(&self.u, exact)
    }
}

/// Solves `(-lap)^p u = f` with clamped conditions on Dirichlet edges. The
/// boundary values are taken from `boundary` (interpolated), zero if absent.
pub fn solve_polyharmonic(
    mesh: &PolygonalMesh,
    p: usize,
    r: usize,
    f: impl Fn(Vec2) -> f64 + Sync,
    boundary: Option<&dyn ScalarField>,
) -> Result<PolySolution> {
    let disc = PolyDiscretization::new(mesh, p, r)?;
    let a = disc.matrix();
    let b = disc.load(f);
    let part = DofPartition::new(&disc.dofs().clamped_mask(mesh));
    let g = match boundary {
        Some(field) => disc.interpolate(mesh, field),
        None => DVector::zeros(disc.n_dofs()),
    };
    let mut fixed = DVector::zeros(disc.n_dofs());
    for i in 0..disc.n_dofs() {
        if !part.is_free(i) {
            fixed[i] = g[i];
        }
    }
    let (aff, rhs) = part.eliminate(&a, &b, &fixed);
    let uf = SparseCholesky::factorize(&aff)?.solve(&rhs)?;
    Ok(PolySolution { u: part.expand(&uf, &fixed), discretization: disc })
}

/// Errors on a mesh sequence; table columns L2, H1, H2 (H2 empty for p = 1).
pub fn convergence_study(
    meshes: &[PolygonalMesh],
    p: usize,
    r: usize,
    f: impl Fn(Vec2) -> f64 + Sync,
    exact: &dyn ScalarField,
) -> Result<ConvergenceTable> {
    let mut table = ConvergenceTable::new(&["L2", "H1", "H2"]);
    for mesh in meshes {
        let sol = solve_polyharmonic(mesh, p, r, &f, None)?;
        let e = sol.errors(exact);
        table.push(mesh.max_diameter(), sol.discretization.n_dofs(), vec![Some(e.l2), Some(e.h1), e.h2]);
    }
    Ok(table)
}
