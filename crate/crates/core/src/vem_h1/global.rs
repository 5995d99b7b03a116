use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::H1LocalSpace;
use crate::field::ScalarField;
use crate::la_core::{assemble, DofPartition, SparseCholesky, SparseMatrix, Triplets};
use crate::mesh::{BoundaryMarker, PolygonalMesh};
use crate::poly_basis::{basis_dim, edge_quadrature, legendre_values, polygon_quadrature, BasisKind};
use crate::{Error, Result, Vec2};

/// Extra quadrature degree used when integrating non-polynomial data.
const DATA_QUAD_EXTRA: usize = 10;

/// Global numbering: vertex values, then the k-1 moments of every edge,
/// then the interior moments cell by cell.
#[derive(Clone, Debug, PartialEq)]
pub struct H1DofMap {
    k: usize,
    n_vertices: usize,
    n_edges: usize,
    n_interior: usize,
    n_dofs: usize,
    cell_dofs: Vec<Vec<usize>>,
}

impl H1DofMap {
    pub fn new(mesh: &PolygonalMesh, k: usize) -> Self {
        let nv = mesh.num_vertices();
        let ne = mesh.num_edges();
        let ni = basis_dim(k as isize - 2);
        let cell_dofs = (0..mesh.num_cells())
            .map(|c| {
                let mut dofs: Vec<usize> = mesh.cell_vertices(c).to_vec();
                for &e in mesh.cell_edges(c) {
                    dofs.extend((0..k - 1).map(|j| nv + e * (k - 1) + j));
                }
                dofs.extend((0..ni).map(|b| nv + ne * (k - 1) + c * ni + b));
                dofs
            })
            .collect();
        Self { k, n_vertices: nv, n_edges: ne, n_interior: ni, n_dofs: nv + ne * (k - 1) + mesh.num_cells() * ni, cell_dofs }
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn cell_dofs(&self, c: usize) -> &[usize] {
        &self.cell_dofs[c]
    }

    pub fn vertex_dof(&self, v: usize) -> usize {
        v
    }

    pub fn edge_dof(&self, e: usize, j: usize) -> usize {
        self.n_vertices + e * (self.k - 1) + j
    }

    pub fn interior_dof(&self, c: usize, b: usize) -> usize {
        self.n_vertices + self.n_edges * (self.k - 1) + c * self.n_interior + b
    }

    /// DOFs lying on Dirichlet edges (vertex values and edge moments).
    pub fn dirichlet_mask(&self, mesh: &PolygonalMesh) -> Vec<bool> {
        let mut mask = vec![false; self.n_dofs];
        for (e, edge) in mesh.edges().iter().enumerate() {
            if edge.boundary == Some(BoundaryMarker::Dirichlet) {
                mask[edge.vertices[0]] = true;
                mask[edge.vertices[1]] = true;
                for j in 0..self.k - 1 {
                    mask[self.edge_dof(e, j)] = true;
                }
            }
        }
        mask
    }
}

/// Local spaces of every cell plus the global numbering.
#[derive(Clone, Debug)]
pub struct H1Discretization {
    kind: BasisKind,
    dofs: H1DofMap,
    spaces: Vec<H1LocalSpace>,
}

impl H1Discretization {
    pub fn new(mesh: &PolygonalMesh, k: usize, kind: BasisKind) -> Result<Self> {
        let spaces = mesh
            .polygons()
            .par_iter()
            .enumerate()
            .map(|(c, cell)| {
                H1LocalSpace::new(cell, k, kind).map_err(|e| match e {
                    Error::RankDeficient { diameter, .. } => Error::RankDeficient { cell: c, diameter },
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { kind, dofs: H1DofMap::new(mesh, k), spaces })
    }

    pub fn order(&self) -> usize {
        self.dofs.order()
    }

    pub fn basis_kind(&self) -> BasisKind {
        self.kind
    }

    pub fn dofs(&self) -> &H1DofMap {
        &self.dofs
    }

    pub fn n_dofs(&self) -> usize {
        self.dofs.n_dofs()
    }

    pub fn spaces(&self) -> &[H1LocalSpace] {
        &self.spaces
    }

    pub fn space(&self, c: usize) -> &H1LocalSpace {
        &self.spaces[c]
    }

    pub fn local_values(&self, c: usize, u: &DVector<f64>) -> DVector<f64> {
        let d = self.dofs.cell_dofs(c);
        DVector::from_iterator(d.len(), d.iter().map(|&i| u[i]))
    }

    /// DOF interpolant of a field.
    pub fn interpolate(&self, mesh: &PolygonalMesh, f: &dyn ScalarField) -> DVector<f64> {
        let k = self.order();
        let mut u = DVector::zeros(self.n_dofs());
        for (v, &p) in mesh.vertices().iter().enumerate() {
            u[self.dofs.vertex_dof(v)] = f.value(p);
        }
        for (e, edge) in mesh.edges().iter().enumerate() {
            if k < 2 {
                break;
            }
            let (a, b) = (mesh.vertex(edge.vertices[0]), mesh.vertex(edge.vertices[1]));
            let rule = edge_quadrature(a, b, 2 * k + DATA_QUAD_EXTRA);
            let len = (b - a).norm();
            for (q, (&p, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                let leg = legendre_values(k - 2, 2.0 * rule.params[q]);
                let val = f.value(p);
                for j in 0..k - 1 {
                    u[self.dofs.edge_dof(e, j)] += w / len * val * leg[j];
                }
            }
        }
        for (c, space) in self.spaces.iter().enumerate() {
            if space.n_interior() == 0 {
                continue;
            }
            let m = space.moments(|p| f.value(p), 2 * k + DATA_QUAD_EXTRA);
            for b in 0..space.n_interior() {
                u[self.dofs.interior_dof(c, b)] = m[b] / space.cell().area();
            }
        }
        u
    }

    fn assemble_locals(&self, locals: &[DMatrix<f64>]) -> SparseMatrix {
        let mut t = Triplets::new();
        for (c, local) in locals.iter().enumerate() {
            let d: Vec<Option<usize>> = self.dofs.cell_dofs(c).iter().map(|&i| Some(i)).collect();
            t.add_block(&d, &d, local);
        }
        assemble(&t, self.n_dofs()).expect("local indices are in range")
    }

    pub fn stiffness(&self) -> SparseMatrix {
        let locals: Vec<_> = self.spaces.par_iter().map(|s| s.stiffness_matrix()).collect();
        self.assemble_locals(&locals)
    }

    pub fn mass(&self, rho: impl Fn(Vec2) -> f64 + Sync) -> SparseMatrix {
        let locals: Vec<_> = self.spaces.par_iter().map(|s| s.mass_matrix(&rho)).collect();
        self.assemble_locals(&locals)
    }

    /// `int f Pi0_k v` for every global basis function.
    pub fn load(&self, f: impl Fn(Vec2) -> f64 + Sync) -> DVector<f64> {
        let k = self.order();
        let locals: Vec<_> = self.spaces.par_iter().map(|s| s.load_vector(&f, 2 * k + DATA_QUAD_EXTRA)).collect();
        let mut b = DVector::zeros(self.n_dofs());
        for (c, local) in locals.iter().enumerate() {
            for (i, &d) in self.dofs.cell_dofs(c).iter().enumerate() {
                b[d] += local[i];
            }
        }
        b
    }

    /// Broken errors `(||u - Pi0 u_h||_0, |u - Pi_nabla u_h|_1)`.
    pub fn errors(&self, u: &DVector<f64>, exact: &dyn ScalarField) -> (f64, f64) {
        let k = self.order();
        let (l2, h1) = self
            .spaces
            .par_iter()
            .enumerate()
            .map(|(c, s)| {
                let local = self.local_values(c, u);
                let c0 = s.pi0() * &local;
                let cn = s.pi_nabla() * &local;
                let quad = polygon_quadrature(s.cell(), 2 * k + DATA_QUAD_EXTRA).expect("cell quadrature");
                let (mut l2, mut h1) = (0.0, 0.0);
                for (&p, &w) in quad.points.iter().zip(&quad.weights) {
                    let basis = s.basis();
                    let e0 = exact.value(p) - basis.eval(p).dot(&c0);
                    let g = Vec2::new(basis.derivative((1, 0), p).dot(&cn), basis.derivative((0, 1), p).dot(&cn));
                    let e1 = exact.gradient(p) - g;
                    l2 += w * e0 * e0;
                    h1 += w * e1.norm_squared();
                }
                (l2, h1)
            })
            .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
        (l2.sqrt(), h1.sqrt())
    }
}

#[derive(Clone, Debug)]
pub struct PoissonSolution {
    pub discretization: H1Discretization,
    pub u: DVector<f64>,
}

impl PoissonSolution {
    pub fn errors(&self, exact: &dyn ScalarField) -> (f64, f64) {
        self.discretization.errors(&self.u, exact)
    }
}

/// `-lap u = f` with `u = g` on Dirichlet edges and natural conditions on
/// Neumann edges (homogeneous flux).
pub fn solve_poisson(
    mesh: &PolygonalMesh,
    k: usize,
    kind: BasisKind,
    source: impl Fn(Vec2) -> f64 + Sync,
    dirichlet: &dyn ScalarField,
) -> Result<PoissonSolution> {
    let disc = H1Discretization::new(mesh, k, kind)?;
    let a = disc.stiffness();
    let b = disc.load(source);
    let part = DofPartition::new(&disc.dofs().dirichlet_mask(mesh));
    let g = disc.interpolate(mesh, dirichlet);
    let (aff, rhs) = part.eliminate(&a, &b, &g);
    let uf = SparseCholesky::factorize(&aff)?.solve(&rhs)?;
    let mut fixed = DVector::zeros(disc.n_dofs());
    for i in 0..disc.n_dofs() {
        if !part.is_free(i) {
            fixed[i] = g[i];
        }
    }
    let u = part.expand(&uf, &fixed);
    Ok(PoissonSolution { discretization: disc, u })
}
