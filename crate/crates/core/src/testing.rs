//! Reference computations used only by unit tests. They deliberately avoid
//! the SVD and eigen routines they are compared against.

use nalgebra::linalg::Schur;
use num_complex::Complex64;

use crate::linalg::{compare_eigenvalues, Matrix};

/// `X^T (X X^T)^{-1}` via an LU solve; requires full row rank.
pub fn pinv_full_row_rank(x: &Matrix) -> Matrix {
    let gram = x * x.transpose();
    let inv = gram.lu().try_inverse().expect("full row rank");
    x.transpose() * inv
}

/// Eigenvalues from nalgebra's real Schur form, in the library's ordering.
pub fn sorted_eigs(a: &Matrix) -> Vec<Complex64> {
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 10_000).expect("schur converged");
    let mut vals: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    vals.sort_by(compare_eigenvalues);
    vals
}

/// Largest distance after greedily pairing each value with its nearest unused partner.
pub fn greedy_max_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for x in a {
        let (k, d) = b
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(k, y)| (k, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        used[k] = true;
        worst = worst.max(d);
    }
    worst
}
