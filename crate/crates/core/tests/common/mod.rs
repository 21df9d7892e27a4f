#![allow(dead_code)]

use std::io::Write;

use dmdc_core::dmdc::stack_omega;
use dmdc_core::linalg::{truncated_svd, CMatrix, Matrix, TruncationPolicy};
use num_complex::Complex64;

/// Writes straight to the process stderr so the line survives output capture.
pub fn report(id: &str, title: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("{verdict} criterion {id}: {title} | {detail}\n");
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
}

pub fn rel_fro(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// `pinv(M) = M^T (M M^T)^{-1}` for full-row-rank `M`, through an LU solve.
pub fn pinv_full_row_rank(m: &Matrix) -> Matrix {
    let gram = m * m.transpose();
    let inv = gram.lu().try_inverse().expect("full row rank");
    m.transpose() * inv
}

/// Least-squares `[A B] = X' pinv([X; Y])`.
pub fn least_squares_g(x: &Matrix, xp: &Matrix, upsilon: &Matrix) -> Matrix {
    xp * pinv_full_row_rank(&stack_omega(x, upsilon).unwrap())
}

fn v_sigma_inverse(v: &Matrix, sigma: &[f64]) -> Matrix {
    let mut out = v.clone();
    for (j, s) in sigma.iter().enumerate() {
        out.column_mut(j).scale_mut(1.0 / s);
    }
    out
}

/// Full-state operator of a fitted model, rebuilt from the data and applied
/// to complex vectors without forming the `n x n` matrix.
pub struct DataOperator {
    left: Matrix,
    right_t: Matrix,
}

impl DataOperator {
    /// `X' V~ S~^{-1} U~^T` for the rank-`r` SVD of X.
    pub fn plain(x: &Matrix, target: &Matrix, r: usize) -> Self {
        let svd = truncated_svd(x, TruncationPolicy::Rank(r)).unwrap();
        let left = target * v_sigma_inverse(&svd.v, &svd.sigma);
        Self { left, right_t: svd.u.transpose() }
    }

    /// `X' V~ S~^{-1} U1~^T` for the rank-`p` SVD of `[X; Y]`.
    pub fn with_inputs(x: &Matrix, xp: &Matrix, upsilon: &Matrix, p: usize) -> Self {
        let omega = stack_omega(x, upsilon).unwrap();
        let svd = truncated_svd(&omega, TruncationPolicy::Rank(p)).unwrap();
        let left = xp * v_sigma_inverse(&svd.v, &svd.sigma);
        let u1 = svd.u.rows(0, x.nrows()).into_owned();
        Self { left, right_t: u1.transpose() }
    }

    pub fn apply(&self, v: &CMatrix) -> CMatrix {
        let re = v.map(|z| z.re);
        let im = v.map(|z| z.im);
        let inner_re = &self.right_t * re;
        let inner_im = &self.right_t * im;
        let out_re = &self.left * inner_re;
        let out_im = &self.left * inner_im;
        CMatrix::from_fn(out_re.nrows(), out_re.ncols(), |i, j| Complex64::new(out_re[(i, j)], out_im[(i, j)]))
    }

    /// Frobenius norm of `left * right_t` through the small Gram matrices.
    pub fn frobenius(&self) -> f64 {
        let lg = self.left.transpose() * &self.left;
        let rg = &self.right_t * self.right_t.transpose();
        lg.component_mul(&rg).sum().max(0.0).sqrt()
    }
}

/// Largest `||A phi - lambda phi|| / ||A||_F` over modes with `|lambda| > 1e-12`.
pub fn mode_residual(op: &DataOperator, values: &[Complex64], modes: &CMatrix) -> f64 {
    let scale = op.frobenius();
    let applied = op.apply(modes);
    let mut worst = 0.0f64;
    for (j, lambda) in values.iter().enumerate() {
        if lambda.norm() <= 1e-12 {
            continue;
        }
        let resid = (applied.column(j) - modes.column(j) * *lambda).norm();
        worst = worst.max(resid / scale);
    }
    worst
}

/// Consistent trajectory data `x_{k+1} = A x_k + B u_k` in latent coordinates
/// of a seeded random stable system, observed through its orthonormal `C`.
pub fn observed_trajectory(
    a: &Matrix,
    b: &Matrix,
    c: &Matrix,
    z0: &Matrix,
    upsilon: &Matrix,
) -> (Matrix, Matrix) {
    let m = upsilon.ncols() + 1;
    let mut z = Matrix::zeros(a.nrows(), m);
    z.set_column(0, &z0.column(0));
    for k in 0..m - 1 {
        let next = a * z.column(k) + b * upsilon.column(k);
        z.set_column(k + 1, &next);
    }
    let traj = c * z;
    (traj.columns(0, m - 1).into_owned(), traj.columns(1, m - 1).into_owned())
}
