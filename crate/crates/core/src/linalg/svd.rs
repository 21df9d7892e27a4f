use super::{ensure_finite, ensure_threshold, Matrix, TruncationPolicy};
use crate::error::{DmdcError, Result};

// Tall inputs are first reduced by a thin QR when rows exceed this multiple of cols.
const QR_PREREDUCE_RATIO: usize = 2;

const JACOBI_MAX_SWEEPS: usize = 80;

/// Thin SVD with singular values sorted non-increasing and a fixed sign per
/// left singular vector (largest-magnitude entry non-negative).
#[derive(Clone, Debug, PartialEq)]
pub struct Svd {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

/// Rank-`k` factors `U~ S~ V~^T` of a matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedSvd {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// `V~ S~^{-1}`, the right factor of the pseudoinverse.
    pub fn v_sigma_inv(&self) -> Matrix {
        let mut out = self.v.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            out.column_mut(j).unscale_mut(*s);
        }
        out
    }

    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }
}

impl Svd {
    /// Number of singular values with `sigma_i / sigma_1 > tau` (0 for a zero matrix).
    pub fn rank(&self, tau: f64) -> usize {
        count_above(&self.sigma, tau)
    }

    pub fn truncate(&self, policy: TruncationPolicy) -> Result<TruncatedSvd> {
        let leading = self.sigma.first().copied().unwrap_or(0.0);
        if leading <= 0.0 {
            return Err(DmdcError::Degenerate(
                "matrix has no positive singular value".into(),
            ));
        }
        let k = match policy {
            TruncationPolicy::Rank(k) => {
                if k == 0 || k > self.sigma.len() {
                    return Err(DmdcError::InvalidInput(format!(
                        "explicit rank {k} outside 1..={}",
                        self.sigma.len()
                    )));
                }
                if self.sigma[k - 1] <= 0.0 {
                    return Err(DmdcError::Degenerate(format!(
                        "singular value {k} is zero; requested rank exceeds the matrix rank"
                    )));
                }
                k
            }
            TruncationPolicy::Threshold(tau) => {
                ensure_threshold(tau)?;
                count_above(&self.sigma, tau)
            }
        };
        Ok(TruncatedSvd {
            u: self.u.columns(0, k).into_owned(),
            sigma: self.sigma[..k].to_vec(),
            v: self.v.columns(0, k).into_owned(),
        })
    }
}

fn count_above(sigma: &[f64], tau: f64) -> usize {
    match sigma.first() {
        Some(&s1) if s1 > 0.0 => sigma.iter().take_while(|&&s| s / s1 > tau).count(),
        _ => 0,
    }
}

/// Economy SVD of `m` with deterministic signs.
pub fn thin_svd(m: &Matrix) -> Result<Svd> {
    ensure_finite(m, "matrix")?;
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(DmdcError::InvalidInput(format!(
            "cannot decompose an empty {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    let (mut u, sigma, mut v) = if m.nrows() >= m.ncols() {
        tall_svd(m)?
    } else {
        let (u, s, v) = tall_svd(&m.transpose())?;
        (v, s, u)
    };

    for j in 0..sigma.len() {
        let col = u.column(j);
        let mut pivot = 0.0_f64;
        for &x in col.iter() {
            if x.abs() > pivot.abs() {
                pivot = x;
            }
        }
        if pivot < 0.0 {
            u.column_mut(j).neg_mut();
            v.column_mut(j).neg_mut();
        }
    }
    Ok(Svd { u, sigma, v })
}

fn tall_svd(m: &Matrix) -> Result<(Matrix, Vec<f64>, Matrix)> {
    let (rows, cols) = m.shape();
    let (q, mut w) = if rows >= QR_PREREDUCE_RATIO * cols {
        let qr = m.clone().qr();
        (Some(qr.q()), qr.r())
    } else {
        (None, m.clone())
    };
    let mut v = Matrix::identity(cols, cols);
    jacobi_orthogonalize(&mut w, &mut v)?;

    let norms: Vec<f64> = w.column_iter().map(|c| c.norm()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));

    let mut u_core = Matrix::zeros(w.nrows(), cols);
    let mut v_sorted = Matrix::zeros(cols, cols);
    let mut sigma = Vec::with_capacity(cols);
    for (dst, &src) in order.iter().enumerate() {
        sigma.push(norms[src]);
        v_sorted.set_column(dst, &v.column(src));
        if norms[src] > 0.0 {
            u_core.set_column(dst, &(w.column(src) / norms[src]));
        }
    }
    let nonzero = sigma.iter().take_while(|&&s| s > 0.0).count();
    complete_orthonormal(&mut u_core, nonzero);
    let u = match q {
        Some(q) => q * u_core,
        None => u_core,
    };
    Ok((u, sigma, v_sorted))
}

/// One-sided Jacobi: rotate column pairs of `w` until all are mutually
/// orthogonal to working precision, accumulating the rotations into `v`.
fn jacobi_orthogonalize(w: &mut Matrix, v: &mut Matrix) -> Result<()> {
    let cols = w.ncols();
    let tol = f64::EPSILON * (w.nrows().max(1) as f64).sqrt();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..cols {
            for j in i + 1..cols {
                let a = w.column(i).norm_squared();
                let b = w.column(j).norm_squared();
                let c = w.column(i).dot(&w.column(j));
                if a == 0.0 || b == 0.0 || c.abs() <= tol * (a * b).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (b - a) / (2.0 * c);
                let t = zeta.signum() / (zeta.abs() + zeta.hypot(1.0));
                let cs = 1.0 / t.hypot(1.0);
                let sn = cs * t;
                rotate_columns(w, i, j, cs, sn);
                rotate_columns(v, i, j, cs, sn);
            }
        }
        if !rotated {
            return Ok(());
        }
    }
    Err(DmdcError::Numerical(format!(
        "Jacobi SVD of a {}x{cols} core did not converge in {JACOBI_MAX_SWEEPS} sweeps",
        w.nrows()
    )))
}

fn rotate_columns(m: &mut Matrix, i: usize, j: usize, cs: f64, sn: f64) {
    for r in 0..m.nrows() {
        let (x, y) = (m[(r, i)], m[(r, j)]);
        m[(r, i)] = cs * x - sn * y;
        m[(r, j)] = sn * x + cs * y;
    }
}

/// Fill columns `from..` of `u` with unit vectors orthogonal to all earlier ones.
fn complete_orthonormal(u: &mut Matrix, from: usize) {
    let rows = u.nrows();
    for j in from..u.ncols() {
        let mut best = Matrix::zeros(rows, 1);
        let mut best_norm = -1.0;
        for e in 0..rows {
            let mut cand = Matrix::zeros(rows, 1);
            cand[(e, 0)] = 1.0;
            for _ in 0..2 {
                for k in 0..j {
                    let proj = u.column(k).dot(&cand.column(0));
                    cand.column_mut(0).axpy(-proj, &u.column(k), 1.0);
                }
            }
            let n = cand.norm();
            if n > best_norm + 1e-12 {
                best_norm = n;
                best = cand / n;
            }
        }
        u.set_column(j, &best.column(0));
    }
}

/// Top-`k` SVD factors under the given truncation policy.
pub fn truncated_svd(m: &Matrix, trunc: TruncationPolicy) -> Result<TruncatedSvd> {
    if let TruncationPolicy::Threshold(tau) = trunc {
        ensure_threshold(tau)?;
    }
    thin_svd(m)?.truncate(trunc)
}

/// Count of singular values with `sigma_i / sigma_1 > tau`; 0 for the zero matrix.
pub fn numerical_rank(m: &Matrix, tau: f64) -> Result<usize> {
    ensure_threshold(tau)?;
    ensure_finite(m, "matrix")?;
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(0);
    }
    let sigma = thin_svd(m)?.sigma;
    Ok(count_above(&sigma, tau))
}
