//! Helpers shared by unit tests: seeded generators and a naive dense oracle.

use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::scalar::{CMatrix, CVector};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn cn(r: &mut ChaCha8Rng) -> Complex<f64> {
    let a: f64 = r.sample(StandardNormal);
    let b: f64 = r.sample(StandardNormal);
    Complex::new(a, b) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn random_vector(r: &mut ChaCha8Rng, m: usize) -> CVector<f64> {
    CVector::from_fn(m, |_, _| cn(r))
}

pub fn random_matrix(r: &mut ChaCha8Rng, m: usize, k: usize) -> CMatrix<f64> {
    CMatrix::from_fn(m, k, |_, _| cn(r))
}

/// `G G^H / k + 0.1 I` with `G` an `m x k` standard complex normal matrix.
pub fn random_psd(r: &mut ChaCha8Rng, m: usize, k: usize) -> CMatrix<f64> {
    let g = random_matrix(r, m, k);
    let mut c = &g * g.adjoint() / Complex::new(k as f64, 0.0);
    for i in 0..m {
        c[(i, i)].re += 0.1;
    }
    // exact symmetry so the Hermitian check cannot trip on rounding
    let ch = c.adjoint();
    (c + ch) * Complex::new(0.5, 0.0)
}

/// Log-density through the LU determinant and explicit inverse.
pub fn naive_logpdf(z: &CVector<f64>, c: &CMatrix<f64>) -> f64 {
    let m = z.len() as f64;
    let det = c.clone().lu().determinant();
    let inv = c.clone().try_inverse().expect("invertible");
    let q = (z.adjoint() * inv * z)[(0, 0)].re;
    -m * std::f64::consts::PI.ln() - det.norm().ln() - q
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + b.abs())
}
