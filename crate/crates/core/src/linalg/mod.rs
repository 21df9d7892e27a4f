//! Dense kernels shared by every estimator: thin SVD with truncation,
//! real eigendecomposition with complex eigenpairs, and rank diagnostics.

mod eig;
mod svd;

pub use eig::{eig, eig_with_limit, EigenDecomposition, DEFAULT_EIG_DIM_LIMIT};
pub(crate) use eig::compare_eigenvalues;
pub use svd::{numerical_rank, thin_svd, truncated_svd, Svd, TruncatedSvd};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{DmdcError, Result};

/// Real 64-bit dense matrix. Snapshot matrices store one snapshot per column.
pub type Matrix = DMatrix<f64>;
/// Complex dense matrix (eigenvectors, dynamic modes).
pub type CMatrix = DMatrix<Complex64>;

/// Relative singular-value threshold used whenever no explicit rank is requested.
pub const DEFAULT_SVD_THRESHOLD: f64 = 1e-10;

/// How many singular triplets to keep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruncationPolicy {
    /// Keep exactly this many triplets.
    Rank(usize),
    /// Keep every triplet with `sigma_i / sigma_1 > tau`.
    Threshold(f64),
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy::Threshold(DEFAULT_SVD_THRESHOLD)
    }
}

impl std::fmt::Display for TruncationPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TruncationPolicy::Rank(k) => write!(f, "rank={k}"),
            TruncationPolicy::Threshold(tau) => write!(f, "threshold={tau:e}"),
        }
    }
}

pub fn ensure_finite(m: &Matrix, what: &str) -> Result<()> {
    if let Some(pos) = m.iter().position(|v| !v.is_finite()) {
        let (r, c) = (pos % m.nrows().max(1), pos / m.nrows().max(1));
        return Err(DmdcError::InvalidInput(format!(
            "{what} has a non-finite entry at ({r}, {c})"
        )));
    }
    Ok(())
}

pub(crate) fn ensure_threshold(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(DmdcError::InvalidInput(format!(
            "relative threshold must lie in (0, 1), got {tau}"
        )));
    }
    Ok(())
}

/// Promote a real matrix to complex.
pub fn to_complex(m: &Matrix) -> CMatrix {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Real matrix times complex matrix without promoting the (usually tall) real factor.
pub fn real_times_complex(a: &Matrix, b: &CMatrix) -> CMatrix {
    let re = a * b.map(|z| z.re);
    let im = a * b.map(|z| z.im);
    CMatrix::from_fn(re.nrows(), re.ncols(), |i, j| Complex64::new(re[(i, j)], im[(i, j)]))
}

/// `|<a, b>| / (|a| |b|)` for complex vectors; 0 when either vector vanishes.
pub fn cosine_similarity<'a, I, J>(a: I, b: J) -> f64
where
    I: IntoIterator<Item = &'a Complex64>,
    J: IntoIterator<Item = &'a Complex64>,
{
    let (mut dot, mut na, mut nb) = (Complex64::new(0.0, 0.0), 0.0, 0.0);
    for (x, y) in a.into_iter().zip(b) {
        dot += x.conj() * y;
        na += x.norm_sqr();
        nb += y.norm_sqr();
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot.norm() / (na.sqrt() * nb.sqrt())
}
