use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("root finding failed to converge: {0}")]
    NoConvergence(String),

    #[error("no bracketing interval: {0}")]
    NoBracket(String),

    #[error("unitarity drift {drift:e} exceeds {limit:e} after kick {kick}")]
    UnitarityDrift { kick: usize, drift: f64, limit: f64 },

    #[error("matrix is not Hermitian: imaginary residue {0:e}")]
    NonHermitian(f64),

    #[error("fit window: {0}")]
    FitWindow(String),

    #[error("determinant out of range: {0}")]
    DeterminantRange(String),

    #[error("scaling collapse: {0}")]
    Collapse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
