use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::C1LocalSpace;
use crate::field::ScalarField;
use crate::la_core::{Assembler, SparseMatrix};
use crate::mesh::PolygonalMesh;
use crate::poly_basis::polygon_quadrature;
use crate::{Error, Result, Vec2};

const DATA_QUAD_EXTRA: usize = 10;

/// Which stabilized form to assemble.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormKind {
    Hessian,
    Gradient,
    Mass,
}

/// Broken errors: H2 and H1 seminorms against the Hessian projection, L2
/// against the L2 projection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct C1Errors {
    pub h2: f64,
    pub h1: f64,
    pub l2: f64,
}

/// Global space: DOFs `3 v + m` with m = 0 the value and m = 1, 2 the
/// scaled gradient of vertex v.
#[derive(Clone, Debug)]
pub struct C1Discretization {
    n_vertices: usize,
    spaces: Vec<C1LocalSpace>,
    assembler: Assembler,
}

impl C1Discretization {
    pub fn new(mesh: &PolygonalMesh) -> Result<Self> {
        let spaces = mesh
            .polygons()
            .par_iter()
            .enumerate()
            .map(|(c, cell)| {
                C1LocalSpace::new(cell).map_err(|e| match e {
                    Error::RankDeficient { diameter, .. } => Error::RankDeficient { cell: c, diameter },
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let n = 3 * mesh.num_vertices();
        let cell_dofs = (0..mesh.num_cells())
            .map(|c| mesh.cell_vertices(c).iter().flat_map(|&v| (0..3).map(move |m| Some(3 * v + m))).collect())
            .collect();
        Ok(Self { n_vertices: mesh.num_vertices(), spaces, assembler: Assembler::new(n, cell_dofs) })
    }

    pub fn n_dofs(&self) -> usize {
        3 * self.n_vertices
    }

    pub fn n_cells(&self) -> usize {
        self.spaces.len()
    }

    pub fn spaces(&self) -> &[C1LocalSpace] {
        &self.spaces
    }

    pub fn space(&self, c: usize) -> &C1LocalSpace {
        &self.spaces[c]
    }

    pub fn assembler(&self) -> &Assembler {
        &self.assembler
    }

    pub fn cell_dofs(&self, c: usize) -> Vec<usize> {
        self.assembler.cell_dofs(c).iter().map(|d| d.expect("all C1 DOFs are global")).collect()
    }

    pub fn local_values(&self, c: usize, u: &DVector<f64>) -> DVector<f64> {
        let d = self.assembler.cell_dofs(c);
        DVector::from_iterator(d.len(), d.iter().map(|i| u[i.unwrap()]))
    }

    pub fn assemble(&self, kind: FormKind) -> SparseMatrix {
        let locals: Vec<DMatrix<f64>> = self
            .spaces
            .iter()
            .map(|s| match kind {
                FormKind::Hessian => s.a_delta().clone(),
                FormKind::Gradient => s.a_nabla().clone(),
                FormKind::Mass => s.a_zero().clone(),
            })
            .collect();
        self.assembler.assemble(&locals)
    }

    /// DOF vector of a constant function.
    pub fn constant(&self, c: f64) -> DVector<f64> {
        DVector::from_fn(self.n_dofs(), |i, _| if i % 3 == 0 { c } else { 0.0 })
    }

    pub fn interpolate(&self, mesh: &PolygonalMesh, f: &dyn ScalarField) -> DVector<f64> {
        let mut u = DVector::zeros(self.n_dofs());
        for (v, &x) in mesh.vertices().iter().enumerate() {
            let g = mesh.vertex_h(v) * f.gradient(x);
            u[3 * v] = f.value(x);
            u[3 * v + 1] = g.x;
            u[3 * v + 2] = g.y;
        }
        u
    }

    /// DOFs fixed by `d_n v = 0` on the boundary: the gradient component
    /// along each boundary normal. Only axis-aligned boundary edges are
    /// supported, so that the constraint acts on a single DOF.
    pub fn neumann_mask(&self, mesh: &PolygonalMesh) -> Result<Vec<bool>> {
        let mut mask = vec![false; self.n_dofs()];
        for (e, edge) in mesh.edges().iter().enumerate() {
            let Some(nu) = mesh.boundary_normal(e) else { continue };
            let m = if nu.y.abs() < 1e-12 {
                1
            } else if nu.x.abs() < 1e-12 {
                2
            } else {
                return Err(Error::Unsupported(format!(
                    "normal-derivative constraint on the oblique boundary edge {e} (normal {:.3}, {:.3})",
                    nu.x, nu.y
                )));
            };
            for &v in &edge.vertices {
                mask[3 * v + m] = true;
            }
        }
        Ok(mask)
    }

    /// L2 load `int f Pi0 v`.
    pub fn load(&self, f: impl Fn(Vec2) -> f64 + Sync) -> DVector<f64> {
        let locals: Vec<DVector<f64>> = self
            .spaces
            .par_iter()
            .map(|s| {
                let quad = polygon_quadrature(s.cell(), 2 + DATA_QUAD_EXTRA).expect("cell quadrature");
                let mut m = DVector::zeros(s.basis().dim());
                for (&x, &w) in quad.points.iter().zip(&quad.weights) {
                    m += w * f(x) * s.basis().eval(x);
                }
                s.pi0().tr_mul(&m)
            })
            .collect();
        self.assembler.assemble_vector(&locals)
    }

    pub fn errors(&self, u: &DVector<f64>, exact: &dyn ScalarField) -> C1Errors {
        let (h2, h1, l2) = self
            .spaces
            .par_iter()
            .enumerate()
            .map(|(c, s)| {
                let local = self.local_values(c, u);
                let cd = s.pi_delta() * &local;
                let c0 = s.pi0() * &local;
                let b = s.basis();
                let quad = polygon_quadrature(s.cell(), 4 + DATA_QUAD_EXTRA).expect("cell quadrature");
                let (mut h2, mut h1, mut l2) = (0.0, 0.0, 0.0);
                for (&x, &w) in quad.points.iter().zip(&quad.weights) {
                    let e0 = exact.value(x) - b.eval(x).dot(&c0);
                    let g = Vec2::new(b.derivative((1, 0), x).dot(&cd), b.derivative((0, 1), x).dot(&cd));
                    let e1 = exact.gradient(x) - g;
                    let hx = exact.hessian(x);
                    let e2 = (hx[(0, 0)] - b.derivative((2, 0), x).dot(&cd)).powi(2)
                        + 2.0 * (hx[(0, 1)] - b.derivative((1, 1), x).dot(&cd)).powi(2)
                        + (hx[(1, 1)] - b.derivative((0, 2), x).dot(&cd)).powi(2);
                    h2 += w * e2;
                    h1 += w * e1.norm_squared();
                    l2 += w * e0 * e0;
                }
                (h2, h1, l2)
            })
            .reduce(|| (0.0, 0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
        C1Errors { h2: h2.sqrt(), h1: h1.sqrt(), l2: l2.sqrt() }
    }
}
