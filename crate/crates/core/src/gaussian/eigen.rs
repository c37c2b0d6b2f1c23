//! Hermitian eigendecomposition with an accuracy check.
//!
//! nalgebra's complex `SymmetricEigen` occasionally returns a decomposition
//! that does not reproduce its input (relative errors around 1e-2 were seen on
//! well conditioned 47x47 matrices). Every result is therefore checked against
//! a few probe vectors; on failure the matrix is solved again through its real
//! symmetric embedding `[[Re H, -Im H], [Im H, Re H]]`, whose real solver is
//! reliable.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::scalar::{cis, CMatrix, CVector, Real, C};

const PROBES: usize = 2;

/// Eigenvalues and orthonormal eigenvectors (as columns) of a Hermitian `h`.
pub fn hermitian_eigen<T: Real>(h: &CMatrix<T>) -> (DVector<T>, CMatrix<T>) {
    let m = h.nrows();
    if m == 0 {
        return (DVector::zeros(0), CMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(h.clone());
    if reproduces(h, &eig.eigenvalues, &eig.eigenvectors) {
        return (eig.eigenvalues, eig.eigenvectors);
    }
    via_real_embedding(h)
}

fn tolerance<T: Real>(h: &CMatrix<T>) -> T {
    let scale = h.iter().fold(T::zero(), |a, x| a + x.norm_sqr()).sqrt();
    T::lit(100.0) * T::lit(h.nrows() as f64) * T::default_epsilon() * scale
}

fn probe<T: Real>(m: usize, k: usize) -> CVector<T> {
    // Deterministic, unit modulus, no special structure.
    CVector::from_fn(m, |i, _| {
        let t = ((i * (2 * k + 3) + k) as f64 * 0.618_033_988_749_895).fract();
        cis(T::lit(std::f64::consts::TAU * t))
    })
}

fn reproduces<T: Real>(h: &CMatrix<T>, vals: &DVector<T>, vecs: &CMatrix<T>) -> bool {
    let m = h.nrows();
    if vals.iter().any(|l| !l.is_finite()) || vecs.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return false;
    }
    let tol = tolerance(h) * T::lit(m as f64).sqrt();
    (0..PROBES).all(|k| {
        let p = probe::<T>(m, k);
        let mut y = vecs.ad_mul(&p);
        for (yi, &l) in y.iter_mut().zip(vals.iter()) {
            *yi *= C::new(l, T::zero());
        }
        let diff = h * &p - vecs * y;
        diff.norm() <= tol
    })
}

fn via_real_embedding<T: Real>(h: &CMatrix<T>) -> (DVector<T>, CMatrix<T>) {
    let m = h.nrows();
    let mut r = DMatrix::<T>::zeros(2 * m, 2 * m);
    for i in 0..m {
        for j in 0..m {
            let x = h[(i, j)];
            r[(i, j)] = x.re;
            r[(i + m, j + m)] = x.re;
            r[(i + m, j)] = x.im;
            r[(i, j + m)] = -x.im;
        }
    }
    let eig = SymmetricEigen::new(r);
    // Each real eigenvector [x; y] maps to a complex eigenvector x + i y of the
    // same eigenvalue; every complex eigenvector shows up twice (as v and i v).
    // Pivoted Gram-Schmidt picks m mutually orthogonal ones.
    let mut cands: Vec<CVector<T>> = (0..2 * m)
        .map(|c| {
            let w = eig.eigenvectors.column(c);
            CVector::from_fn(m, |i, _| C::new(w[i], w[i + m]))
        })
        .collect();
    let mut alive = vec![true; 2 * m];
    let mut vals = DVector::zeros(m);
    let mut vecs = CMatrix::zeros(m, m);
    for k in 0..m {
        let best = (0..2 * m)
            .filter(|&c| alive[c])
            .max_by(|&a, &b| cands[a].norm_squared().partial_cmp(&cands[b].norm_squared()).unwrap())
            .expect("2m candidates for m vectors");
        alive[best] = false;
        let v = cands[best].normalize();
        for c in 0..2 * m {
            if alive[c] {
                let proj = v.dotc(&cands[c]);
                cands[c] -= &v * proj;
            }
        }
        vals[k] = (v.adjoint() * h * &v)[(0, 0)].re;
        vecs.set_column(k, &v);
    }
    (vals, vecs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::{random_psd, rng};

    fn recon_error(h: &CMatrix<f64>, vals: &DVector<f64>, vecs: &CMatrix<f64>) -> f64 {
        let mut s = vecs.clone();
        for (k, mut col) in s.column_iter_mut().enumerate() {
            col *= C::new(vals[k], 0.0);
        }
        (s * vecs.adjoint() - h).norm() / h.norm()
    }

    #[test]
    fn embedding_path_reconstructs_and_is_orthonormal() {
        let mut r = rng(5);
        for (m, k) in [(1usize, 1usize), (6, 2), (47, 60), (30, 30)] {
            let h = random_psd(&mut r, m, k);
            let (vals, vecs) = via_real_embedding(&h);
            assert!(recon_error(&h, &vals, &vecs) < 1e-12);
            let g = vecs.adjoint() * &vecs - CMatrix::<f64>::identity(m, m);
            assert!(g.norm() < 1e-12);
        }
    }

    #[test]
    fn degenerate_spectrum_gives_full_basis() {
        let h = CMatrix::<f64>::identity(5, 5) * C::new(3.0, 0.0);
        let (vals, vecs) = via_real_embedding(&h);
        assert!(vals.iter().all(|&l| (l - 3.0).abs() < 1e-13));
        assert!((vecs.adjoint() * &vecs - CMatrix::<f64>::identity(5, 5)).norm() < 1e-12);
    }

    #[test]
    fn checked_decomposition_reconstructs_random_matrices() {
        let mut r = rng(77);
        for trial in 0..200 {
            let m = 1 + trial % 60;
            let h = random_psd(&mut r, m, 1 + (trial * 7) % 70);
            let (vals, vecs) = hermitian_eigen(&h);
            let e = recon_error(&h, &vals, &vecs);
            assert!(e < 1e-10, "m={m} error {e}");
        }
    }
}
