use thiserror::Error;

/// Failure modes shared by every evaluator in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A series ran out of terms (or weight) before its tail was certified.
    #[error("series not converged after {terms} terms (partial value {partial:e})")]
    Convergence { partial: f64, terms: usize },

    /// The result would overflow, or an input exceeds a documented guard.
    #[error("range error: {0}")]
    Range(String),

    /// Inputs have incompatible lengths or dimensions.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Coincident squared entries make a determinant formula 0/0.
    #[error("degenerate configuration: {0}; use the series path")]
    Degeneracy(String),

    /// A parameter object violates its invariants.
    #[error("invalid parameter: {0}")]
    Validation(String),

    /// A numerical routine (quadrature, factorization) failed.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// Short machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Convergence { .. } => "convergence",
            Error::Range(_) => "range",
            Error::Shape(_) => "shape",
            Error::Degeneracy(_) => "degeneracy",
            Error::Validation(_) => "validation",
            Error::Numerical(_) => "numerical",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
