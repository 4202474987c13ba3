//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside its valid domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// A PSF sample is (numerically) zero, equalization is impossible.
    #[error("singular PSF: |G_l| = {0:e} below tolerance")]
    SingularPsf(f64),
    /// First Toeplitz entry has a non-negligible imaginary part.
    #[error("not Hermitian: Im(u0) = {0:e} above tolerance")]
    NotHermitian(f64),
    /// Matrix has a negative eigenvalue beyond the stated tolerance.
    #[error("not PSD: min eigenvalue {0:e}")]
    NotPsd(f64),
    /// Toeplitz matrix is numerically full rank, no Vandermonde decomposition.
    #[error("no decomposition: toep(u) is full rank (n = {0})")]
    FullRank(usize),
    /// Linear system too ill-conditioned to solve reliably.
    #[error("conditioning error: {0}")]
    Conditioning(String),
    /// An eigensolver or factorization failed to converge.
    #[error("numerical error: {0}")]
    Numerical(String),
    /// Requested an output the method does not produce.
    #[error("unsupported method: {0}")]
    UnsupportedMethod(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}
