//! Shared helpers for unit tests: small deterministic random inputs.

use crate::matrix::HermitianMatrix;
use crate::rng::{rng_from, uniform_f64};
use nalgebra::DMatrix;
use num_complex::Complex64;

/// A dense random Hermitian matrix with entries of order one, deterministic
/// in the seed.
pub fn make_hermitian(n: usize, seed: u64) -> HermitianMatrix {
    let mut rng = rng_from(seed);
    let mut m = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for i in 0..n {
        for j in i..n {
            let re = 2.0 * uniform_f64(&mut rng) - 1.0;
            let im = if i == j { 0.0 } else { 2.0 * uniform_f64(&mut rng) - 1.0 };
            m[(i, j)] = Complex64::new(re, im);
            m[(j, i)] = Complex64::new(re, -im);
        }
    }
    HermitianMatrix::from_dense(&m).expect("constructed Hermitian")
}
