//! DMD with control: separate the unforced dynamics from the effect of
//! actuation, either with a known input map or by estimating it jointly.

use num_complex::Complex64;

use crate::dmd::{
    check_explicit_limit, check_pair, dmd_modes, ensure_dt, fit_projected, normalize_columns,
};
use crate::error::{DmdcError, Result};
use crate::linalg::{
    ensure_finite, eig, numerical_rank, thin_svd, CMatrix, EigenDecomposition, Matrix,
    TruncationPolicy, DEFAULT_SVD_THRESHOLD,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DmdcVariant {
    KnownInputMap,
    UnknownInputMap,
}

#[derive(Clone, Debug)]
enum Factors {
    /// `lift = (X' - B Y) V~ S~^{-1}`, projected with the left singular vectors of X.
    Known { lift: Matrix, b: Matrix },
    /// `lift = X' V~ S~^{-1}` with the input-space basis split into state and control rows.
    Unknown { lift: Matrix, u_state: Matrix, u_control: Matrix },
}

#[derive(Clone, Debug)]
pub struct DmdcModel {
    pub variant: DmdcVariant,
    /// Reduced dynamics (r x r).
    pub a_tilde: Matrix,
    /// Reduced input map (r x l).
    pub b_tilde: Matrix,
    /// Projection basis (n x r): left singular vectors of X' for the unknown-map
    /// variant, of X for the known-map variant.
    pub basis: Matrix,
    pub eigen: EigenDecomposition,
    pub modes: CMatrix,
    /// Truncation rank p of the input space (equals r for the known-map variant).
    pub input_rank: usize,
    /// Truncation rank r of the output space.
    pub output_rank: usize,
    pub dt: f64,
    factors: Factors,
}

/// Whether the stacked state/input data can separate A from B.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IdentifiabilityReport {
    pub omega_rank: usize,
    /// Numerical rank of X plus the number of inputs.
    pub required_rank: usize,
    pub collinearity_flag: bool,
}

impl DmdcModel {
    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigen.values
    }

    pub fn state_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b_tilde.ncols()
    }

    pub fn normalized_modes(&self) -> CMatrix {
        normalize_columns(&self.modes)
    }

    /// Full-state operators `(A_bar, B_bar)`; refuses when `n > limit`.
    pub fn explicit_operators(&self, limit: usize) -> Result<(Matrix, Matrix)> {
        check_explicit_limit(self.state_dim(), limit)?;
        Ok(match &self.factors {
            Factors::Known { lift, b } => (lift * self.basis.transpose(), b.clone()),
            Factors::Unknown { lift, u_state, u_control } => {
                (lift * u_state.transpose(), lift * u_control.transpose())
            }
        })
    }
}

/// Vertically stack state and input snapshots into `[X; Y]`.
pub fn stack_omega(x: &Matrix, upsilon: &Matrix) -> Result<Matrix> {
    if x.ncols() != upsilon.ncols() {
        return Err(DmdcError::Shape(format!(
            "X has {} snapshots but the input matrix has {}",
            x.ncols(),
            upsilon.ncols()
        )));
    }
    let (n, l) = (x.nrows(), upsilon.nrows());
    let mut omega = Matrix::zeros(n + l, x.ncols());
    omega.rows_mut(0, n).copy_from(x);
    omega.rows_mut(n, l).copy_from(upsilon);
    Ok(omega)
}

fn check_inputs(x: &Matrix, xp: &Matrix, upsilon: &Matrix) -> Result<()> {
    check_pair(x, xp)?;
    if upsilon.ncols() != x.ncols() {
        return Err(DmdcError::Shape(format!(
            "input matrix has {} snapshots, expected {}",
            upsilon.ncols(),
            x.ncols()
        )));
    }
    ensure_finite(upsilon, "input matrix")
}

/// DMDc with a known input map `B`: regress `X' - B Y` on the truncated SVD of X.
pub fn dmdc_fit_known_b(
    x: &Matrix,
    xp: &Matrix,
    upsilon: &Matrix,
    b: &Matrix,
    trunc: TruncationPolicy,
    dt: f64,
) -> Result<DmdcModel> {
    check_inputs(x, xp, upsilon)?;
    ensure_dt(dt)?;
    if b.nrows() != x.nrows() || b.ncols() != upsilon.nrows() {
        return Err(DmdcError::Shape(format!(
            "B must be {}x{}, got {}x{}",
            x.nrows(),
            upsilon.nrows(),
            b.nrows(),
            b.ncols()
        )));
    }
    ensure_finite(b, "B")?;

    // With no actuation the target is X' itself, so the fit coincides with plain DMD.
    let target = if upsilon.iter().all(|&v| v == 0.0) {
        xp.clone()
    } else {
        xp - b * upsilon
    };
    let fit = fit_projected(x, &target, trunc)?;
    let rank = fit.svd.rank();
    Ok(DmdcModel {
        variant: DmdcVariant::KnownInputMap,
        b_tilde: fit.svd.u.transpose() * b,
        a_tilde: fit.a_tilde,
        basis: fit.svd.u,
        eigen: fit.eigen,
        modes: fit.modes,
        input_rank: rank,
        output_rank: rank,
        dt,
        factors: Factors::Known { lift: fit.lift, b: b.clone() },
    })
}

/// DMDc with an unknown input map: estimate `[A B]` from `X' ~ [A B] [X; Y]`.
///
/// `trunc_p` truncates the stacked input space, `trunc_r` the output space
/// spanned by X'. A threshold policy for r is capped at p; explicit ranks
/// with `p < r` are rejected. Closed-loop data with a rank-deficient stack
/// still yields a model, flagged in the returned report.
pub fn dmdc_fit_unknown_b(
    x: &Matrix,
    xp: &Matrix,
    upsilon: &Matrix,
    trunc_p: TruncationPolicy,
    trunc_r: TruncationPolicy,
    dt: f64,
) -> Result<(DmdcModel, IdentifiabilityReport)> {
    check_inputs(x, xp, upsilon)?;
    ensure_dt(dt)?;
    if let (TruncationPolicy::Rank(p), TruncationPolicy::Rank(r)) = (trunc_p, trunc_r) {
        if p < r {
            return Err(DmdcError::TruncationOrder { p, r });
        }
    }
    let n = x.nrows();
    let l = upsilon.nrows();

    let omega = stack_omega(x, upsilon)?;
    let omega_svd = thin_svd(&omega)?;
    let input = omega_svd.truncate(trunc_p)?;
    let p = input.rank();

    let output_svd = thin_svd(xp)?;
    let r = match trunc_r {
        TruncationPolicy::Rank(r) if r > p => return Err(DmdcError::TruncationOrder { p, r }),
        TruncationPolicy::Rank(r) => r,
        TruncationPolicy::Threshold(_) => output_svd.truncate(trunc_r)?.rank().min(p),
    };
    let output = output_svd.truncate(TruncationPolicy::Rank(r))?;
    let basis = output.u;

    let lift = xp * input.v_sigma_inv();
    let u_state = input.u.rows(0, n).into_owned();
    let u_control = input.u.rows(n, l).into_owned();

    let projected = basis.transpose() * &lift;
    let state_to_basis = u_state.transpose() * &basis;
    let a_tilde = &projected * &state_to_basis;
    let b_tilde = &projected * u_control.transpose();
    let eigen = eig(&a_tilde)?;
    let modes = dmd_modes(&eigen, &(&lift * &state_to_basis), &basis);

    let omega_rank = omega_svd.rank(DEFAULT_SVD_THRESHOLD);
    let required_rank = numerical_rank(x, DEFAULT_SVD_THRESHOLD)? + l;
    let report = IdentifiabilityReport {
        omega_rank,
        required_rank,
        collinearity_flag: omega_rank < required_rank,
    };

    let model = DmdcModel {
        variant: DmdcVariant::UnknownInputMap,
        a_tilde,
        b_tilde,
        basis,
        eigen,
        modes,
        input_rank: p,
        output_rank: r,
        dt,
        factors: Factors::Unknown { lift, u_state, u_control },
    };
    Ok((model, report))
}
