use crate::la_core::LaError;
use crate::mesh::MeshError;
use crate::poly_basis::BasisError;

/// Errors raised by the local spaces and the problem drivers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Linear(#[from] LaError),
    #[error("projector system is rank deficient on cell {cell} (diameter {diameter:e})")]
    RankDeficient { cell: usize, diameter: f64 },
    #[error("unsupported discretization: {0}")]
    Unsupported(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("solution blew up at step {step} (norm {norm:e}); the time step likely violates the CFL bound")]
    BlowUp { step: usize, norm: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
