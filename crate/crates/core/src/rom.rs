//! Reduced-order state-space models built from fitted operators:
//! simulation, MIMO frequency response, and spectrum comparison.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::dmd::{ensure_dt, DmdModel};
use crate::dmdc::DmdcModel;
use crate::error::{DmdcError, Result};
use crate::linalg::{
    cosine_similarity, eig, ensure_finite, real_times_complex, CMatrix, Matrix,
};

/// Distance from `e^{i omega}` to a pole below which a frequency is singular.
pub const POLE_TOLERANCE: f64 = 1e-12;

/// Largest spectrum size matched by exhaustive search.
pub const EXHAUSTIVE_MATCH_LIMIT: usize = 8;

/// Discrete-time `x_{k+1} = A x_k + B u_k`, `y_k = C x_k` (no feedthrough).
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpaceRealization {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub dt: f64,
}

impl StateSpaceRealization {
    pub fn new(a: Matrix, b: Matrix, c: Matrix, dt: f64) -> Result<Self> {
        let r = a.nrows();
        if !a.is_square() || b.nrows() != r || c.ncols() != r {
            return Err(DmdcError::Shape(format!(
                "inconsistent realization: A {}x{}, B {}x{}, C {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        ensure_finite(&a, "A")?;
        ensure_finite(&b, "B")?;
        ensure_finite(&c, "C")?;
        ensure_dt(dt)?;
        Ok(Self { a, b, c, dt })
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }
}

/// Anything that provides a reduced operator pair and a lift back to full state.
pub trait ReducedModel {
    fn reduced_dynamics(&self) -> &Matrix;
    /// Reduced input map; `None` for autonomous models.
    fn reduced_input(&self) -> Option<&Matrix>;
    fn lift_basis(&self) -> &Matrix;
    fn sample_interval(&self) -> f64;
}

impl ReducedModel for DmdModel {
    fn reduced_dynamics(&self) -> &Matrix {
        &self.a_tilde
    }
    fn reduced_input(&self) -> Option<&Matrix> {
        None
    }
    fn lift_basis(&self) -> &Matrix {
        &self.basis
    }
    fn sample_interval(&self) -> f64 {
        self.dt
    }
}

impl ReducedModel for DmdcModel {
    fn reduced_dynamics(&self) -> &Matrix {
        &self.a_tilde
    }
    fn reduced_input(&self) -> Option<&Matrix> {
        Some(&self.b_tilde)
    }
    fn lift_basis(&self) -> &Matrix {
        &self.basis
    }
    fn sample_interval(&self) -> f64 {
        self.dt
    }
}

/// Realization `(A~, B~, C)` with `C` the model's basis unless overridden.
pub fn realize<M: ReducedModel>(
    model: &M,
    c_override: Option<&Matrix>,
) -> Result<StateSpaceRealization> {
    let a = model.reduced_dynamics().clone();
    let r = a.nrows();
    let b = model.reduced_input().cloned().unwrap_or_else(|| Matrix::zeros(r, 0));
    let c = match c_override {
        Some(c) if c.ncols() != r => {
            return Err(DmdcError::Shape(format!(
                "output map must have {r} columns, got {}",
                c.ncols()
            )))
        }
        Some(c) => c.clone(),
        None => model.lift_basis().clone(),
    };
    StateSpaceRealization::new(a, b, c, model.sample_interval())
}

/// Iterate the reduced recursion from `x0` under `u_seq` (one column per step)
/// and return the `q x horizon` outputs `C x_1, ..., C x_horizon`.
pub fn simulate(ss: &StateSpaceRealization, x0: &DVector<f64>, u_seq: &Matrix) -> Result<Matrix> {
    if x0.len() != ss.order() {
        return Err(DmdcError::Shape(format!(
            "initial state has {} entries, model order is {}",
            x0.len(),
            ss.order()
        )));
    }
    if u_seq.nrows() != ss.inputs() {
        return Err(DmdcError::Shape(format!(
            "input sequence has {} rows, model has {} inputs",
            u_seq.nrows(),
            ss.inputs()
        )));
    }
    let horizon = u_seq.ncols();
    if horizon == 0 {
        return Err(DmdcError::InvalidInput("simulation horizon must be at least 1".into()));
    }
    let mut x = x0.clone();
    let mut out = Matrix::zeros(ss.outputs(), horizon);
    for k in 0..horizon {
        x = &ss.a * &x;
        if ss.inputs() > 0 {
            x += &ss.b * u_seq.column(k);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(DmdcError::Divergence { step: k + 1 });
        }
        out.set_column(k, &(&ss.c * &x));
    }
    Ok(out)
}

/// Singular values of `C (zI - A)^{-1} B` over a frequency grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyResponseCurve {
    pub omegas: Vec<f64>,
    /// One non-increasing list of `min(q, l)` values per frequency.
    pub sigmas: Vec<Vec<f64>>,
}

/// `count` logarithmically spaced frequencies in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![hi],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|i| {
                    if i == count - 1 {
                        hi
                    } else {
                        (a + (b - a) * i as f64 / (count - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

/// Default grid: 200 log-spaced points on `[1e-3, pi]` rad/sample.
pub fn default_frequency_grid() -> Vec<f64> {
    log_grid(1e-3, std::f64::consts::PI, 200)
}

/// Frequency-response evaluator that caches the pole set of a realization.
pub struct FrequencyResponse<'a> {
    ss: &'a StateSpaceRealization,
    poles: Vec<Complex64>,
}

impl<'a> FrequencyResponse<'a> {
    pub fn new(ss: &'a StateSpaceRealization) -> Result<Self> {
        if ss.inputs() == 0 {
            return Err(DmdcError::InvalidInput(
                "frequency response needs at least one input".into(),
            ));
        }
        let poles = if ss.order() > 0 { eig(&ss.a)?.values } else { vec![] };
        Ok(Self { ss, poles })
    }

    /// Transfer matrix at `e^{i omega}`; errors when the point sits on a pole.
    pub fn transfer(&self, omega: f64, index: usize) -> Result<CMatrix> {
        let z = Complex64::from_polar(1.0, omega);
        if self.poles.iter().any(|p| (p - z).norm() <= POLE_TOLERANCE) {
            return Err(DmdcError::SingularFrequency { omega, index });
        }
        let r = self.ss.order();
        let resolvent = CMatrix::from_fn(r, r, |i, j| {
            let diag = if i == j { z } else { Complex64::new(0.0, 0.0) };
            diag - self.ss.a[(i, j)]
        });
        let rhs = self.ss.b.map(|v| Complex64::new(v, 0.0));
        let solved = resolvent
            .lu()
            .solve(&rhs)
            .ok_or(DmdcError::SingularFrequency { omega, index })?;
        Ok(real_times_complex(&self.ss.c, &solved))
    }

    /// Non-increasing singular values of the transfer matrix at `omega`.
    pub fn sigma_at(&self, omega: f64, index: usize) -> Result<Vec<f64>> {
        let g = self.transfer(omega, index)?;
        let mut s: Vec<f64> = g.singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s.truncate(self.ss.outputs().min(self.ss.inputs()));
        Ok(s)
    }
}

/// Singular values of `C (e^{i omega} I - A)^{-1} B` at each grid frequency in `(0, pi]`.
pub fn frequency_response(
    ss: &StateSpaceRealization,
    omegas: &[f64],
) -> Result<FrequencyResponseCurve> {
    if let Some(bad) = omegas.iter().find(|w| !(**w > 0.0 && **w <= std::f64::consts::PI)) {
        return Err(DmdcError::InvalidInput(format!(
            "frequency {bad} outside (0, pi] rad/sample"
        )));
    }
    let fr = FrequencyResponse::new(ss)?;
    let sigmas = omegas
        .iter()
        .enumerate()
        .map(|(i, &w)| fr.sigma_at(w, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(FrequencyResponseCurve { omegas: omegas.to_vec(), sigmas })
}

/// A pairing between two spectra.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralMatching {
    /// `(index in a, index in b)` for every element of `a`, in order of `a`.
    pub pairs: Vec<(usize, usize)>,
    pub distances: Vec<f64>,
}

impl SpectralMatching {
    pub fn max_distance(&self) -> f64 {
        self.distances.iter().copied().fold(0.0, f64::max)
    }
}

/// Minimum total-distance pairing of two equally sized spectra: exhaustive
/// search up to [`EXHAUSTIVE_MATCH_LIMIT`] values, greedy closest-pair above.
pub fn match_spectra(a: &[Complex64], b: &[Complex64]) -> Result<SpectralMatching> {
    if a.len() != b.len() {
        return Err(DmdcError::Shape(format!(
            "cannot match spectra of sizes {} and {}",
            a.len(),
            b.len()
        )));
    }
    let k = a.len();
    let cost = |i: usize, j: usize| (a[i] - b[j]).norm();
    let assignment: Vec<usize> = if k <= EXHAUSTIVE_MATCH_LIMIT {
        let mut best: Option<(f64, Vec<usize>)> = None;
        let mut perm: Vec<usize> = (0..k).collect();
        permute(&mut perm, 0, &mut |p| {
            let total: f64 = p.iter().enumerate().map(|(i, &j)| cost(i, j)).sum();
            if best.as_ref().is_none_or(|(t, _)| total < *t) {
                best = Some((total, p.to_vec()));
            }
        });
        best.map(|(_, p)| p).unwrap_or_default()
    } else {
        let mut candidates: Vec<(f64, usize, usize)> = (0..k)
            .flat_map(|i| (0..k).map(move |j| (i, j)))
            .map(|(i, j)| (cost(i, j), i, j))
            .collect();
        candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        let mut assigned = vec![usize::MAX; k];
        let mut taken = vec![false; k];
        for (_, i, j) in candidates {
            if assigned[i] == usize::MAX && !taken[j] {
                assigned[i] = j;
                taken[j] = true;
            }
        }
        assigned
    };
    let pairs: Vec<(usize, usize)> = assignment.into_iter().enumerate().collect();
    let distances = pairs.iter().map(|&(i, j)| cost(i, j)).collect();
    Ok(SpectralMatching { pairs, distances })
}

fn permute(p: &mut Vec<usize>, start: usize, visit: &mut impl FnMut(&[usize])) {
    if start + 1 >= p.len() {
        visit(p);
        return;
    }
    for i in start..p.len() {
        p.swap(start, i);
        permute(p, start + 1, visit);
        p.swap(start, i);
    }
}

/// Largest matched distance between two spectra under [`match_spectra`].
pub fn spectral_distance(a: &[Complex64], b: &[Complex64]) -> Result<f64> {
    Ok(match_spectra(a, b)?.max_distance())
}

/// Cosine similarity of the modes paired by `matching`, in order of its pairs.
pub fn matched_mode_similarities(
    matching: &SpectralMatching,
    a_modes: &CMatrix,
    b_modes: &CMatrix,
) -> Result<Vec<f64>> {
    if a_modes.nrows() != b_modes.nrows() {
        return Err(DmdcError::Shape(format!(
            "modes live in spaces of dimension {} and {}",
            a_modes.nrows(),
            b_modes.nrows()
        )));
    }
    let out_of_range = |&&(i, j): &&(usize, usize)| i >= a_modes.ncols() || j >= b_modes.ncols();
    if let Some(&(i, j)) = matching.pairs.iter().find(out_of_range) {
        return Err(DmdcError::Shape(format!("no mode for matched pair ({i}, {j})")));
    }
    Ok(matching
        .pairs
        .iter()
        .map(|&(i, j)| cosine_similarity(a_modes.column(i).iter(), b_modes.column(j).iter()))
        .collect())
}

/// Largest gap between two curves on the same grid, relative to the
/// reference's largest singular value at each frequency.
pub fn max_relative_sigma_gap(
    curve: &FrequencyResponseCurve,
    reference: &FrequencyResponseCurve,
) -> Result<f64> {
    if curve.omegas != reference.omegas {
        return Err(DmdcError::Shape("curves use different frequency grids".into()));
    }
    let mut worst = 0.0f64;
    for (s, r) in curve.sigmas.iter().zip(&reference.sigmas) {
        if s.len() != r.len() {
            return Err(DmdcError::Shape(format!(
                "{} singular values against {}",
                s.len(),
                r.len()
            )));
        }
        let scale = r.first().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
        for (a, b) in s.iter().zip(r) {
            worst = worst.max((a - b).abs() / scale);
        }
    }
    Ok(worst)
}
