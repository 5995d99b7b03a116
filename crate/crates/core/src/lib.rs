//! Conforming virtual element discretizations on general polygonal meshes.
//!
//! The crate is organized bottom-up: [`mesh`] and [`poly_basis`] provide the
//! geometric and polynomial substrate, [`la_core`] the sparse/dense algebra,
//! and the three local space flavors ([`vem_h1`], [`vem_poly`], [`vem_c1`])
//! feed the problem drivers ([`vem_poly`] solves polyharmonic problems,
//! [`cahn_hilliard`] and [`elastodynamics`] integrate in time).

// `!(x > 0.0)` is used on purpose: it also rejects NaN. Index loops mirror
// the matrix formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cahn_hilliard;
pub mod convergence;
pub mod elastodynamics;
mod error;
pub mod field;
pub mod la_core;
pub mod mesh;
pub mod poly_basis;
pub mod vem_c1;
pub mod vem_h1;
pub mod vem_poly;

pub use error::{Error, Result};

/// Points and vectors in the plane.
pub type Vec2 = nalgebra::Vector2<f64>;
