//! Seeded generators for the reference systems, each returning snapshot
//! matrices together with the ground truth that produced them.

use std::f64::consts::PI;

use nalgebra::QR;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{DmdcError, Result};
use crate::linalg::{compare_eigenvalues, CMatrix, Matrix};
use crate::rom::StateSpaceRealization;

/// Radius of the disk the random stable spectra are drawn from.
pub const STABLE_RADIUS: f64 = 0.95;

/// Largest wavenumber magnitude considered by the sparse Fourier generator.
pub const MAX_WAVENUMBER: i64 = 8;

/// Largest tolerated imaginary part of a synthesized real field.
pub const IMAGINARY_RESIDUE_TOLERANCE: f64 = 1e-10;

/// The system behind a synthetic dataset.
///
/// When `c_true` is present the snapshots are measurements `x = C z` of a
/// latent state `z` with `z' = A z + B u`, and `C` has orthonormal columns.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub a_true: Matrix,
    pub b_true: Matrix,
    pub c_true: Option<Matrix>,
    pub eigs_true: Vec<Complex64>,
    pub modes_true: Option<CMatrix>,
    pub seed: u64,
}

impl GroundTruth {
    /// One step of the true dynamics expressed in snapshot coordinates.
    pub fn step(&self, x: &Matrix, upsilon: &Matrix) -> Matrix {
        match &self.c_true {
            None => &self.a_true * x + &self.b_true * upsilon,
            Some(c) => c * (&self.a_true * (c.transpose() * x) + &self.b_true * upsilon),
        }
    }

    /// Largest absolute deviation of `xp` from one true step of `x`.
    pub fn consistency_residual(&self, ds: &SynthDataset) -> f64 {
        let predicted = self.step(&ds.x, &ds.upsilon);
        (&predicted - &ds.xp).amax()
    }

    /// The generating system as a realization, with identity output when `c_true` is absent.
    pub fn realization(&self, dt: f64) -> Result<StateSpaceRealization> {
        let c = match &self.c_true {
            Some(c) => c.clone(),
            None => Matrix::identity(self.a_true.nrows(), self.a_true.nrows()),
        };
        StateSpaceRealization::new(self.a_true.clone(), self.b_true.clone(), c, dt)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthDataset {
    pub x: Matrix,
    pub xp: Matrix,
    pub upsilon: Matrix,
    pub truth: GroundTruth,
    pub dt: f64,
}

impl SynthDataset {
    /// Full trajectory `[x_1, ..., x_m]` when `xp` is `x` shifted by one column.
    pub fn trajectory(&self) -> Option<Matrix> {
        let cols = self.x.ncols();
        if cols > 1 && self.x.columns(1, cols - 1) != self.xp.columns(0, cols - 1) {
            return None;
        }
        let mut traj = Matrix::zeros(self.x.nrows(), cols + 1);
        traj.columns_mut(0, cols).copy_from(&self.x);
        traj.column_mut(cols).copy_from(&self.xp.column(cols - 1));
        Some(traj)
    }

    /// Root-mean-square of the trajectory entries.
    pub fn signal_rms(&self) -> f64 {
        let traj = self.trajectory().unwrap_or_else(|| self.x.clone());
        (traj.norm_squared() / traj.len() as f64).sqrt()
    }
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Orthonormal basis of the column space of a full-column-rank matrix,
/// with signs fixed so that the triangular factor has a positive diagonal.
fn orthonormal_columns(m: Matrix) -> Matrix {
    let k = m.ncols();
    let qr = QR::new(m);
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn check_count(name: &str, value: usize, min: usize) -> Result<()> {
    if value < min {
        return Err(DmdcError::InvalidConfig(format!("{name} must be at least {min}, got {value}")));
    }
    Ok(())
}

/// The unstable diagonal system `diag(1.5, 0.1)` driven by state feedback
/// `u_k = k_gain * x1_k` through `B = [1, 0]^T`.
pub fn gen_example1(x0: [f64; 2], k_gain: f64, m: usize) -> Result<SynthDataset> {
    if m < 2 {
        return Err(DmdcError::InsufficientData(format!(
            "a trajectory needs at least 2 snapshots, got {m}"
        )));
    }
    let a = Matrix::from_row_slice(2, 2, &[1.5, 0.0, 0.0, 0.1]);
    let b = Matrix::from_column_slice(2, 1, &[1.0, 0.0]);
    let mut traj = Matrix::zeros(2, m);
    let mut upsilon = Matrix::zeros(1, m - 1);
    traj[(0, 0)] = x0[0];
    traj[(1, 0)] = x0[1];
    for k in 0..m - 1 {
        let u = k_gain * traj[(0, k)];
        upsilon[(0, k)] = u;
        let next = &a * traj.column(k) + &b * u;
        traj.column_mut(k + 1).copy_from(&next);
    }
    Ok(SynthDataset {
        x: traj.columns(0, m - 1).into_owned(),
        xp: traj.columns(1, m - 1).into_owned(),
        upsilon,
        truth: GroundTruth {
            a_true: a,
            b_true: b,
            c_true: None,
            eigs_true: vec![Complex64::new(1.5, 0.0), Complex64::new(0.1, 0.0)],
            modes_true: None,
            seed: 0,
        },
        dt: 1.0,
    })
}

/// A random stable system of order `n` with `l` inputs and `q` outputs.
///
/// Eigenvalues are uniform in the disk of radius [`STABLE_RADIUS`], placed in
/// conjugate pairs (plus one real eigenvalue when `n` is odd) and rotated by a
/// random orthogonal similarity. `C` has orthonormal columns when `q >= n` and
/// orthonormal rows otherwise.
pub fn gen_random_stable_ss(
    n: usize,
    l: usize,
    q: usize,
    seed: u64,
) -> Result<(StateSpaceRealization, GroundTruth)> {
    check_count("n", n, 1)?;
    check_count("l", l, 1)?;
    check_count("q", q, 1)?;
    let mut rng = rng(seed, 0);

    let mut blocks = Matrix::zeros(n, n);
    let mut eigs = Vec::with_capacity(n);
    for j in 0..n / 2 {
        let radius = STABLE_RADIUS * rng.random::<f64>().sqrt();
        let angle = PI * rng.random::<f64>();
        let (re, im) = (radius * angle.cos(), radius * angle.sin());
        let i = 2 * j;
        blocks[(i, i)] = re;
        blocks[(i, i + 1)] = im;
        blocks[(i + 1, i)] = -im;
        blocks[(i + 1, i + 1)] = re;
        eigs.push(Complex64::new(re, im));
        eigs.push(Complex64::new(re, -im));
    }
    if n % 2 == 1 {
        let re = rng.random_range(-STABLE_RADIUS..=STABLE_RADIUS);
        blocks[(n - 1, n - 1)] = re;
        eigs.push(Complex64::new(re, 0.0));
    }
    eigs.sort_by(compare_eigenvalues);

    let rot = orthonormal_columns(gaussian_matrix(&mut rng, n, n));
    let a = &rot * blocks * rot.transpose();
    let b = gaussian_matrix(&mut rng, n, l);
    let c_raw = gaussian_matrix(&mut rng, q, n);
    let c = if q >= n {
        orthonormal_columns(c_raw)
    } else {
        orthonormal_columns(c_raw.transpose()).transpose()
    };

    let truth = GroundTruth {
        a_true: a.clone(),
        b_true: b.clone(),
        c_true: Some(c.clone()),
        eigs_true: eigs,
        modes_true: None,
        seed,
    };
    Ok((StateSpaceRealization::new(a, b, c, 1.0)?, truth))
}

/// Seeded standard-normal `l x (m-1)` input matrix.
pub fn gen_random_inputs(l: usize, m: usize, seed: u64) -> Result<Matrix> {
    check_count("l", l, 1)?;
    check_count("m", m, 1)?;
    Ok(gaussian_matrix(&mut rng(seed, 1), l, m - 1))
}

/// Measurement snapshots of a random stable system excited by random inputs.
///
/// Requires `q >= n` so the measurements determine the latent state.
pub fn gen_example2(n: usize, l: usize, q: usize, m: usize, seed: u64) -> Result<SynthDataset> {
    if q < n {
        return Err(DmdcError::InvalidConfig(format!(
            "need at least as many outputs as states (q = {q}, n = {n})"
        )));
    }
    if m < 2 {
        return Err(DmdcError::InsufficientData(format!(
            "a trajectory needs at least 2 snapshots, got {m}"
        )));
    }
    let (ss, truth) = gen_random_stable_ss(n, l, q, seed)?;
    let upsilon = gen_random_inputs(l, m, seed)?;
    let mut z = gaussian_matrix(&mut rng(seed, 2), n, m);
    for k in 0..m - 1 {
        let next = &ss.a * z.column(k) + &ss.b * upsilon.column(k);
        z.column_mut(k + 1).copy_from(&next);
    }
    let traj = &ss.c * z;
    Ok(SynthDataset {
        x: traj.columns(0, m - 1).into_owned(),
        xp: traj.columns(1, m - 1).into_owned(),
        upsilon,
        truth,
        dt: ss.dt,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputSignal {
    /// Independent fair coin flips between 0 and 1.
    BinaryRandom,
    /// Independent standard normal samples.
    Gaussian,
}

/// A spatially localized actuator: a Gaussian bump driven by a scalar signal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActuationSpec {
    /// Bump center in grid cells `(column, row)`; `None` puts it at a quarter of the grid.
    pub center: Option<[f64; 2]>,
    /// Standard deviation of the bump in grid cells.
    pub width: f64,
    /// Peak value of the bump.
    pub amplitude: f64,
    pub signal: InputSignal,
}

impl Default for ActuationSpec {
    fn default() -> Self {
        Self { center: None, width: 5.0, amplitude: -1.0, signal: InputSignal::BinaryRandom }
    }
}

impl ActuationSpec {
    fn validate(&self) -> Result<()> {
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(DmdcError::InvalidConfig(format!(
                "actuation width must be positive, got {}",
                self.width
            )));
        }
        if !self.amplitude.is_finite() {
            return Err(DmdcError::InvalidConfig("actuation amplitude must be finite".into()));
        }
        if let Some(c) = self.center {
            if !(c[0].is_finite() && c[1].is_finite()) {
                return Err(DmdcError::InvalidConfig("actuation center must be finite".into()));
            }
        }
        Ok(())
    }

    /// The bump sampled on a periodic `grid x grid` lattice, row-major.
    pub fn bump(&self, grid: usize) -> Vec<f64> {
        let n = grid as f64;
        let [cx, cy] = self.center.unwrap_or([n / 4.0, n / 4.0]);
        let wrap = |d: f64| {
            let d = d.rem_euclid(n);
            d.min(n - d)
        };
        let two_w2 = 2.0 * self.width * self.width;
        let mut out = Vec::with_capacity(grid * grid);
        for iy in 0..grid {
            for ix in 0..grid {
                let (dx, dy) = (wrap(ix as f64 - cx), wrap(iy as f64 - cy));
                out.push(self.amplitude * (-(dx * dx + dy * dy) / two_w2).exp());
            }
        }
        out
    }
}

/// Parameters of one Fourier mode of the sparse system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FourierMode {
    /// Wavevector `(kx, ky)`; its negation carries the conjugate coefficient.
    pub wavevector: (i64, i64),
    pub damping: f64,
    pub frequency: f64,
}

impl FourierMode {
    /// Discrete-time eigenvalue `exp((-damping + i frequency) dt)`.
    pub fn eigenvalue(&self, dt: f64) -> Complex64 {
        Complex64::new(-self.damping, self.frequency).scale(dt).exp()
    }

    fn phase(&self, grid: usize, ix: usize, iy: usize) -> f64 {
        let (kx, ky) = self.wavevector;
        2.0 * PI * (kx * ix as i64 + ky * iy as i64) as f64 / grid as f64
    }
}

fn wrap_index(k: i64, grid: usize) -> usize {
    k.rem_euclid(grid as i64) as usize
}

/// Draws `n_modes` wavevectors distinct up to sign, with damping and frequency.
pub fn sparse_fourier_modes(grid: usize, n_modes: usize, seed: u64) -> Result<Vec<FourierMode>> {
    if grid < 4 || !grid.is_power_of_two() {
        return Err(DmdcError::InvalidConfig(format!(
            "grid must be a power of two no smaller than 4, got {grid}"
        )));
    }
    check_count("n_modes", n_modes, 1)?;
    let kmax = MAX_WAVENUMBER.min(grid as i64 / 4);
    let mut candidates = Vec::new();
    for kx in 0..=kmax {
        for ky in -kmax..=kmax {
            if kx > 0 || ky > 0 {
                candidates.push((kx, ky));
            }
        }
    }
    if n_modes > candidates.len() {
        return Err(DmdcError::InvalidConfig(format!(
            "a {grid}x{grid} grid supports at most {} modes, asked for {n_modes}",
            candidates.len()
        )));
    }
    let mut rng = rng(seed, 0);
    let mut modes = Vec::with_capacity(n_modes);
    for j in 0..n_modes {
        let pick = rng.random_range(j..candidates.len());
        candidates.swap(j, pick);
        modes.push(FourierMode {
            wavevector: candidates[j],
            damping: rng.random_range(0.005..=0.05),
            frequency: rng.random_range(0.5..=2.0),
        });
    }
    Ok(modes)
}

struct Fft2 {
    grid: usize,
    forward: std::sync::Arc<dyn rustfft::Fft<f64>>,
    inverse: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl Fft2 {
    fn new(grid: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { grid, forward: planner.plan_fft_forward(grid), inverse: planner.plan_fft_inverse(grid) }
    }

    /// Unnormalized 2-D transform of a row-major `grid x grid` array.
    fn apply(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.grid;
        let fft = if inverse { &self.inverse } else { &self.forward };
        fft.process(data);
        let mut column = vec![Complex64::new(0.0, 0.0); n];
        for ix in 0..n {
            for iy in 0..n {
                column[iy] = data[iy * n + ix];
            }
            fft.process(&mut column);
            for iy in 0..n {
                data[iy * n + ix] = column[iy];
            }
        }
    }
}

/// Real field `sum_j 2 Re(a_j exp(i k_j . r))` synthesized by inverse FFT.
fn synthesize_field(fft: &Fft2, modes: &[FourierMode], coeffs: &[Complex64]) -> Result<Vec<f64>> {
    let n = fft.grid;
    let mut spectrum = vec![Complex64::new(0.0, 0.0); n * n];
    for (mode, &a) in modes.iter().zip(coeffs) {
        let (kx, ky) = mode.wavevector;
        spectrum[wrap_index(ky, n) * n + wrap_index(kx, n)] += a;
        spectrum[wrap_index(-ky, n) * n + wrap_index(-kx, n)] += a.conj();
    }
    fft.apply(&mut spectrum, true);
    let scale = spectrum.iter().map(|z| z.re.abs()).fold(1.0, f64::max);
    let residue = spectrum.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if residue > IMAGINARY_RESIDUE_TOLERANCE * scale {
        return Err(DmdcError::Numerical(format!(
            "synthesized field has imaginary residue {residue:e}"
        )));
    }
    Ok(spectrum.into_iter().map(|z| z.re).collect())
}

/// Sparse Fourier dynamics on a periodic `grid x grid` lattice with a
/// localized actuator. Snapshots are flattened row-major to length `grid^2`.
///
/// The ground truth is expressed in the orthonormal real basis of cosine and
/// sine patterns of the active wavevectors, so `a_true` is block diagonal with
/// one 2x2 rotation-scaling block per mode.
pub fn gen_sparse_fourier(
    grid: usize,
    n_modes: usize,
    m: usize,
    seed: u64,
    actuation: &ActuationSpec,
) -> Result<SynthDataset> {
    if m < 2 {
        return Err(DmdcError::InsufficientData(format!(
            "a trajectory needs at least 2 snapshots, got {m}"
        )));
    }
    actuation.validate()?;
    let modes = sparse_fourier_modes(grid, n_modes, seed)?;
    let dt = 1.0;
    let n = grid * grid;
    let fft = Fft2::new(grid);
    let mut rng = rng(seed, 1);

    let mut bump: Vec<Complex64> =
        actuation.bump(grid).into_iter().map(|v| Complex64::new(v, 0.0)).collect();
    fft.apply(&mut bump, false);
    let forcing: Vec<Complex64> = modes
        .iter()
        .map(|mode| {
            let (kx, ky) = mode.wavevector;
            bump[wrap_index(ky, grid) * grid + wrap_index(kx, grid)] / n as f64
        })
        .collect();

    let mut coeffs: Vec<Complex64> = modes
        .iter()
        .map(|_| Complex64::from_polar(rng.random_range(0.5..=1.0), rng.random_range(0.0..2.0 * PI)))
        .collect();
    let lambdas: Vec<Complex64> = modes.iter().map(|mode| mode.eigenvalue(dt)).collect();

    let mut traj = Matrix::zeros(n, m);
    let mut upsilon = Matrix::zeros(1, m - 1);
    for k in 0..m {
        let field = synthesize_field(&fft, &modes, &coeffs)?;
        traj.column_mut(k).copy_from_slice(&field);
        if k + 1 == m {
            break;
        }
        let u = match actuation.signal {
            InputSignal::BinaryRandom => f64::from(u8::from(rng.random_bool(0.5))),
            InputSignal::Gaussian => StandardNormal.sample(&mut rng),
        };
        upsilon[(0, k)] = u;
        for ((a, lambda), beta) in coeffs.iter_mut().zip(&lambdas).zip(&forcing) {
            *a = lambda * *a + beta * u;
        }
    }

    let truth = sparse_fourier_truth(grid, &modes, &lambdas, &forcing, seed);
    Ok(SynthDataset {
        x: traj.columns(0, m - 1).into_owned(),
        xp: traj.columns(1, m - 1).into_owned(),
        upsilon,
        truth,
        dt,
    })
}

fn sparse_fourier_truth(
    grid: usize,
    modes: &[FourierMode],
    lambdas: &[Complex64],
    forcing: &[Complex64],
    seed: u64,
) -> GroundTruth {
    let n = grid * grid;
    let k = modes.len();
    let norm = (2.0f64).sqrt() / grid as f64;
    // Coordinates in the cos/sin basis are sqrt(2) N (Re a, -Im a).
    let coord = (2.0f64).sqrt() * grid as f64;

    let mut c = Matrix::zeros(n, 2 * k);
    let mut a = Matrix::zeros(2 * k, 2 * k);
    let mut b = Matrix::zeros(2 * k, 1);
    let mut pairs: Vec<(Complex64, usize, bool)> = Vec::with_capacity(2 * k);
    for (j, mode) in modes.iter().enumerate() {
        for iy in 0..grid {
            for ix in 0..grid {
                let theta = mode.phase(grid, ix, iy);
                c[(iy * grid + ix, 2 * j)] = norm * theta.cos();
                c[(iy * grid + ix, 2 * j + 1)] = norm * theta.sin();
            }
        }
        let lambda = lambdas[j];
        let i = 2 * j;
        a[(i, i)] = lambda.re;
        a[(i, i + 1)] = lambda.im;
        a[(i + 1, i)] = -lambda.im;
        a[(i + 1, i + 1)] = lambda.re;
        b[(i, 0)] = coord * forcing[j].re;
        b[(i + 1, 0)] = -coord * forcing[j].im;
        pairs.push((lambda, j, false));
        pairs.push((lambda.conj(), j, true));
    }
    pairs.sort_by(|p, q| compare_eigenvalues(&p.0, &q.0));

    let scale = 1.0 / grid as f64;
    let mut shapes = CMatrix::zeros(n, 2 * k);
    for (col, &(_, j, conjugate)) in pairs.iter().enumerate() {
        let sign = if conjugate { -1.0 } else { 1.0 };
        for iy in 0..grid {
            for ix in 0..grid {
                let theta = sign * modes[j].phase(grid, ix, iy);
                shapes[(iy * grid + ix, col)] = Complex64::from_polar(scale, theta);
            }
        }
    }

    GroundTruth {
        a_true: a,
        b_true: b,
        c_true: Some(c),
        eigs_true: pairs.iter().map(|p| p.0).collect(),
        modes_true: Some(shapes),
        seed,
    }
}

/// Adds i.i.d. Gaussian noise of standard deviation `sigma`.
///
/// When `xp` is `x` shifted by one column the noise is drawn per trajectory
/// snapshot, so shared snapshots stay identical in both matrices.
pub fn add_noise(ds: &SynthDataset, sigma: f64, seed: u64) -> Result<SynthDataset> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(DmdcError::InvalidConfig(format!(
            "noise level must be finite and non-negative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(ds.clone());
    }
    let mut rng = rng(seed, 3);
    let mut noisy = ds.clone();
    let (rows, cols) = ds.x.shape();
    match ds.trajectory() {
        Some(traj) => {
            let noise = gaussian_matrix(&mut rng, rows, cols + 1) * sigma;
            let traj = traj + noise;
            noisy.x = traj.columns(0, cols).into_owned();
            noisy.xp = traj.columns(1, cols).into_owned();
        }
        None => {
            noisy.x += gaussian_matrix(&mut rng, rows, cols) * sigma;
            noisy.xp += gaussian_matrix(&mut rng, rows, cols) * sigma;
        }
    }
    Ok(noisy)
}
