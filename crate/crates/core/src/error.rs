use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("degenerate cell {cell}: area {area:e}")]
    DegenerateCell { cell: usize, area: f64 },

    #[error("empty displacement space: no free displacement vertex")]
    EmptyDisplacementSpace,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("rotation mass matrix not invertible (entry {index} = {value:e})")]
    RotationMassNotInvertible { index: usize, value: f64 },

    #[error("factorization breakdown in {what} (pivot {pivot:?})")]
    Factorization { what: String, pivot: Option<usize> },

    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),

    #[error("empty finite spectrum: all {0} modes classified infinite")]
    EmptyFiniteSpectrum(usize),

    #[error("invalid eigenvector: {0}")]
    InvalidEigenvector(String),

    #[error("ambiguous first eigenvalue: smallest-modulus values form a conjugate pair {0}")]
    AmbiguousFirstEigenvalue(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
