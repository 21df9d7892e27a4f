//! Exact DMD: a reduced linear operator, its spectrum and dynamic modes
//! estimated from state snapshots alone.

use num_complex::Complex64;

use crate::error::{DmdcError, Result};
use crate::linalg::{
    eig, real_times_complex, truncated_svd, CMatrix, EigenDecomposition, Matrix, TruncatedSvd,
    TruncationPolicy,
};

/// Eigenvalues with magnitude at or below this use the basis-projection mode rule.
pub const ZERO_EIGENVALUE_THRESHOLD: f64 = 1e-12;

/// Largest state dimension for which the full `n x n` operator may be formed.
pub const DEFAULT_EXPLICIT_LIMIT: usize = 500;

#[derive(Clone, Debug)]
pub struct DmdModel {
    /// Reduced operator `U~^T X' V~ S~^{-1}` (r x r).
    pub a_tilde: Matrix,
    /// Left singular vectors of X (n x r).
    pub basis: Matrix,
    pub eigen: EigenDecomposition,
    /// Dynamic modes, one column per eigenvalue, not normalized.
    pub modes: CMatrix,
    pub rank: usize,
    pub dt: f64,
    /// `X' V~ S~^{-1}` (n x r); the full operator is `lift * basis^T`.
    lift: Matrix,
}

impl DmdModel {
    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigen.values
    }

    pub fn state_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Continuous-time rates `ln(lambda) / dt`; zero eigenvalues map to `-inf`.
    pub fn continuous_eigenvalues(&self) -> Vec<Complex64> {
        self.eigen.values.iter().map(|l| l.ln() / self.dt).collect()
    }

    /// Modes scaled to unit 2-norm, for display.
    pub fn normalized_modes(&self) -> CMatrix {
        normalize_columns(&self.modes)
    }

    /// Form the full operator `X' V~ S~^{-1} U~^T`, refusing when `n > limit`.
    pub fn explicit_operator(&self, limit: usize) -> Result<Matrix> {
        check_explicit_limit(self.state_dim(), limit)?;
        Ok(&self.lift * self.basis.transpose())
    }
}

pub(crate) fn check_explicit_limit(n: usize, limit: usize) -> Result<()> {
    if n > limit {
        return Err(DmdcError::InvalidInput(format!(
            "refusing to form a {n}x{n} operator (limit {limit})"
        )));
    }
    Ok(())
}

pub(crate) fn normalize_columns(m: &CMatrix) -> CMatrix {
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            col.unscale_mut(norm);
        }
    }
    out
}

pub(crate) fn ensure_dt(dt: f64) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(DmdcError::InvalidInput(format!("sampling interval must be positive, got {dt}")));
    }
    Ok(())
}

/// Split an `n x m` trajectory into `X` (columns 1..m-1) and `X'` (columns 2..m).
pub fn split_trajectory(traj: &Matrix) -> Result<(Matrix, Matrix)> {
    let m = traj.ncols();
    if m < 2 {
        return Err(DmdcError::InsufficientData(format!(
            "a trajectory needs at least 2 snapshots, got {m}"
        )));
    }
    Ok((traj.columns(0, m - 1).into_owned(), traj.columns(1, m - 1).into_owned()))
}

/// Lift reduced eigenvectors to full-state modes.
///
/// `lift` is the n x r matrix `Y V~ S~^{-1} M` that maps reduced coordinates to
/// the state space (with `M` an extra right factor for the control variant),
/// and `basis` the n x r projection basis used for zero eigenvalues.
pub fn dmd_modes(eigen: &EigenDecomposition, lift: &Matrix, basis: &Matrix) -> CMatrix {
    let exact = real_times_complex(lift, &eigen.vectors);
    let projected = real_times_complex(basis, &eigen.vectors);
    let mut modes = exact;
    for (j, lambda) in eigen.values.iter().enumerate() {
        if lambda.norm() <= ZERO_EIGENVALUE_THRESHOLD {
            modes.set_column(j, &projected.column(j));
        }
    }
    modes
}

pub(crate) fn check_pair(x: &Matrix, xp: &Matrix) -> Result<()> {
    if x.shape() != xp.shape() {
        return Err(DmdcError::Shape(format!(
            "X is {}x{} but X' is {}x{}",
            x.nrows(),
            x.ncols(),
            xp.nrows(),
            xp.ncols()
        )));
    }
    if x.ncols() == 0 || x.nrows() == 0 {
        return Err(DmdcError::InsufficientData("snapshot matrices are empty".into()));
    }
    Ok(())
}

/// Shared core of DMD and known-input DMDc: regress `target` on the truncated SVD of `x`.
pub(crate) struct ProjectedFit {
    pub svd: TruncatedSvd,
    pub lift: Matrix,
    pub a_tilde: Matrix,
    pub eigen: EigenDecomposition,
    pub modes: CMatrix,
}

pub(crate) fn fit_projected(x: &Matrix, target: &Matrix, trunc: TruncationPolicy) -> Result<ProjectedFit> {
    crate::linalg::ensure_finite(target, "X'")?;
    let svd = truncated_svd(x, trunc)?;
    let lift = target * svd.v_sigma_inv();
    let a_tilde = svd.u.transpose() * &lift;
    let eigen = eig(&a_tilde)?;
    let modes = dmd_modes(&eigen, &lift, &svd.u);
    Ok(ProjectedFit { svd, lift, a_tilde, eigen, modes })
}

/// Fit exact DMD to snapshot pairs `X' ~ A X`.
pub fn dmd_fit(x: &Matrix, xp: &Matrix, trunc: TruncationPolicy, dt: f64) -> Result<DmdModel> {
    check_pair(x, xp)?;
    ensure_dt(dt)?;
    let fit = fit_projected(x, xp, trunc)?;
    Ok(DmdModel {
        rank: fit.svd.rank(),
        a_tilde: fit.a_tilde,
        basis: fit.svd.u,
        eigen: fit.eigen,
        modes: fit.modes,
        dt,
        lift: fit.lift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cosine_similarity, to_complex};
    use crate::testing::{greedy_max_distance, pinv_full_row_rank, sorted_eigs};
    use proptest::prelude::*;

    fn trajectory(a: &Matrix, x0: &[f64], m: usize) -> Matrix {
        let n = x0.len();
        let mut traj = Matrix::zeros(n, m);
        traj.set_column(0, &nalgebra::DVector::from_column_slice(x0));
        for k in 1..m {
            let next = a * traj.column(k - 1);
            traj.set_column(k, &next);
        }
        traj
    }

    #[test]
    fn split_definition_and_boundary() {
        let traj = Matrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0]);
        let (x, xp) = split_trajectory(&traj).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 2.0]);
        assert_eq!(xp.as_slice(), &[2.0, 3.0]);
        assert!(matches!(
            split_trajectory(&Matrix::zeros(3, 1)),
            Err(DmdcError::InsufficientData(_))
        ));
    }

    #[test]
    fn constant_trajectory_has_unit_eigenvalue() {
        let traj = Matrix::from_element(2, 6, 1.0);
        let (x, xp) = split_trajectory(&traj).unwrap();
        let model = dmd_fit(&x, &xp, TruncationPolicy::default(), 1.0).unwrap();
        assert_eq!(model.rank, 1);
        assert!((model.eigenvalues()[0] - Complex64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn diagonal_system_against_pseudoinverse_oracle() {
        let a = Matrix::from_row_slice(2, 2, &[0.9, 0.0, 0.0, 0.2]);
        let (x, xp) = split_trajectory(&trajectory(&a, &[1.0, 1.0], 5)).unwrap();
        let model = dmd_fit(&x, &xp, TruncationPolicy::default(), 0.1).unwrap();
        let oracle = sorted_eigs(&(&xp * pinv_full_row_rank(&x)));
        for (got, want) in model.eigenvalues().iter().zip(&oracle) {
            assert!((got - want).norm() < 1e-8 * want.norm());
        }
        assert!((model.eigenvalues()[0].re - 0.9).abs() < 1e-10);
        assert!((model.eigenvalues()[1].re - 0.2).abs() < 1e-10);
        // Modes align with the coordinate axes.
        let e1 = to_complex(&Matrix::from_column_slice(2, 1, &[1.0, 0.0]));
        let e2 = to_complex(&Matrix::from_column_slice(2, 1, &[0.0, 1.0]));
        assert!(cosine_similarity(model.modes.column(0).iter(), e1.iter()) > 1.0 - 1e-12);
        assert!(cosine_similarity(model.modes.column(1).iter(), e2.iter()) > 1.0 - 1e-12);
    }

    #[test]
    fn feedback_data_corrupts_plain_dmd() {
        let x = Matrix::from_row_slice(2, 4, &[4.0, 2.0, 1.0, 0.5, 7.0, 0.7, 0.07, 0.007]);
        let xp = Matrix::from_row_slice(2, 4, &[2.0, 1.0, 0.5, 0.25, 0.7, 0.07, 0.007, 0.0007]);
        let model = dmd_fit(&x, &xp, TruncationPolicy::default(), 1.0).unwrap();
        let oracle = sorted_eigs(&(&xp * pinv_full_row_rank(&x)));
        for (got, want) in model.eigenvalues().iter().zip(&oracle) {
            assert!((got - want).norm() < 1e-8);
        }
        assert!((model.eigenvalues()[0].re - 1.5).abs() > 1e-3);
    }

    #[test]
    fn nilpotent_data_uses_projection_branch() {
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        // Identity snapshots make the reduced operator exactly nilpotent; generic
        // snapshots would perturb the defective zero eigenvalue to O(sqrt(eps)).
        let x = Matrix::identity(2, 2);
        let xp = &a * &x;
        let model = dmd_fit(&x, &xp, TruncationPolicy::Rank(2), 1.0).unwrap();
        assert!(model.eigenvalues().iter().all(|l| l.norm() <= ZERO_EIGENVALUE_THRESHOLD));
        let expected = real_times_complex(&model.basis, &model.eigen.vectors);
        assert_eq!(model.modes, expected);
    }

    #[test]
    fn shape_and_degenerate_errors() {
        let x = Matrix::zeros(2, 3);
        assert!(matches!(
            dmd_fit(&x, &Matrix::zeros(2, 4), TruncationPolicy::default(), 1.0),
            Err(DmdcError::Shape(_))
        ));
        assert!(matches!(
            dmd_fit(&x, &x, TruncationPolicy::default(), 1.0),
            Err(DmdcError::Degenerate(_))
        ));
    }

    #[test]
    fn explicit_operator_limit() {
        let x = Matrix::identity(3, 3);
        let model = dmd_fit(&x, &x, TruncationPolicy::default(), 1.0).unwrap();
        assert!(model.explicit_operator(2).is_err());
        assert!((model.explicit_operator(3).unwrap() - Matrix::identity(3, 3)).amax() < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn modes_are_eigenvectors_of_explicit_operator(
            n in 1usize..8,
            extra in 1usize..8,
            entries in proptest::collection::vec(-1.0f64..1.0, 8 * 8 + 8 * 16),
        ) {
            let m = n + extra;
            let a = Matrix::from_fn(n, n, |i, j| entries[i * 8 + j]);
            let x = Matrix::from_fn(n, m, |i, j| entries[64 + i * 16 + j]);
            prop_assume!(crate::linalg::numerical_rank(&x, 1e-6).unwrap() == n);
            let xp = &a * &x;
            let model = dmd_fit(&x, &xp, TruncationPolicy::default(), 1.0).unwrap();
            let abar = model.explicit_operator(DEFAULT_EXPLICIT_LIMIT).unwrap();
            // Explicit operator reproduces the data and the generator.
            prop_assert!((&abar * &x - &xp).norm() <= 1e-8 * xp.norm().max(1e-300));
            let abar_c = to_complex(&abar);
            let modes = model.normalized_modes();
            for (j, lambda) in model.eigenvalues().iter().enumerate() {
                if lambda.norm() > ZERO_EIGENVALUE_THRESHOLD {
                    let phi = modes.column(j).into_owned();
                    prop_assert!((&abar_c * &phi - &phi * *lambda).norm() <= 1e-8 * abar.norm());
                }
            }
            // Reduced spectrum equals the generator spectrum.
            let truth = sorted_eigs(&a);
            prop_assert!(greedy_max_distance(model.eigenvalues(), &truth) <= 1e-8);
        }
    }
}
