//! Shared inputs for the benchmarks.

use dmdc_core::linalg::Matrix;
use dmdc_core::synth::{gen_example2, gen_sparse_fourier, ActuationSpec, SynthDataset};

/// Deterministic dense matrix with entries in `[-1, 1)`.
pub fn dense(rows: usize, cols: usize) -> Matrix {
    let mut state = 0x9e37_79b9_7f4a_7c15u64;
    Matrix::from_fn(rows, cols, |_, _| {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 52) as f64 - 1.0
    })
}

pub fn random_system(seed: u64) -> SynthDataset {
    gen_example2(10, 3, 100, 200, seed).expect("valid configuration")
}

pub fn field(grid: usize) -> SynthDataset {
    gen_sparse_fourier(grid, 5, 60, 0, &ActuationSpec::default()).expect("valid configuration")
}
