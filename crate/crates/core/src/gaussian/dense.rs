use nalgebra::ComplexField;
use nalgebra::{Cholesky, Dyn};

use super::{log_norm_const, JITTER_REL};
use crate::error::{Error, Result};
use crate::scalar::{CMatrix, CVector, Real, C};

/// Number of tenfold jitter escalations tried before a factorization is
/// declared failed.
pub const JITTER_RETRIES: usize = 8;

/// Checks `c` is square and Hermitian within `1e-10` relative to its largest
/// entry.
pub fn check_hermitian<T: Real>(c: &CMatrix<T>, what: &str) -> Result<()> {
    let (r, k) = c.shape();
    if r != k {
        return Err(Error::Validation(format!("{what}: matrix is {r}x{k}, not square")));
    }
    let scale = c.iter().fold(T::zero(), |acc, x| acc.max(x.norm1()));
    let tol = T::lit(1e-10) * scale.max(T::one());
    for i in 0..r {
        for j in i..r {
            let d = c[(i, j)] - c[(j, i)].conj();
            if d.norm1() > tol {
                return Err(Error::Validation(format!(
                    "{what}: not Hermitian at ({i},{j}), deviation {}",
                    d.norm1().to_f64_lossy()
                )));
            }
        }
    }
    Ok(())
}

fn real_trace<T: Real>(c: &CMatrix<T>) -> T {
    (0..c.nrows()).fold(T::zero(), |acc, i| acc + c[(i, i)].re)
}

/// Cholesky factorization with escalating diagonal jitter.
///
/// The first attempt is unregularized; subsequent attempts add
/// `1e-12 * trace / M * 10^k` to the diagonal. Returns the factor and the
/// jitter actually applied.
pub fn cholesky_jittered<T: Real>(c: &CMatrix<T>, what: &str) -> Result<(Cholesky<C<T>, Dyn>, T)> {
    let m = c.nrows();
    if m == 0 {
        return Err(Error::Validation(format!("{what}: empty covariance")));
    }
    if let Some(ch) = Cholesky::new(c.clone()) {
        if factor_is_finite(&ch) {
            return Ok((ch, T::zero()));
        }
    }
    let tr = real_trace(c);
    if !(tr > T::zero()) || !tr.is_finite() {
        return Err(Error::Factorization { context: format!("{what}: trace {} admits no jitter", tr.to_f64_lossy()) });
    }
    let mut eps = T::lit(JITTER_REL) * tr / T::lit(m as f64);
    for _ in 0..JITTER_RETRIES {
        let mut shifted = c.clone();
        for i in 0..m {
            shifted[(i, i)].re += eps;
        }
        if let Some(ch) = Cholesky::new(shifted) {
            if factor_is_finite(&ch) {
                return Ok((ch, eps));
            }
        }
        eps *= T::lit(10.0);
    }
    Err(Error::Factorization { context: format!("{what}: not positive definite after maximum jitter") })
}

fn factor_is_finite<T: Real>(ch: &Cholesky<C<T>, Dyn>) -> bool {
    let l = ch.l_dirty();
    (0..l.nrows()).all(|i| {
        let d = l[(i, i)];
        d.re.is_finite() && d.re > T::zero() && d.im.abs() <= T::lit(1e-6) * d.re
    })
}

/// `log CN(z; 0, C) = -M log(pi) - log det C - z^H C^{-1} z`.
pub fn cgauss_logpdf_dense<T: Real>(z: &CVector<T>, c: &CMatrix<T>) -> Result<T> {
    let m = z.len();
    if m == 0 {
        return Err(Error::Validation("empty measurement vector".into()));
    }
    if c.nrows() != m {
        return Err(Error::Dimension { what: "covariance vs measurement", expected: m, found: c.nrows() });
    }
    check_hermitian(c, "dense covariance")?;
    let (ch, _) = cholesky_jittered(c, "dense covariance")?;
    let l = ch.l_dirty();
    let mut logdet = T::zero();
    for i in 0..m {
        logdet += l[(i, i)].re.ln();
    }
    logdet *= T::lit(2.0);
    let w = l.solve_lower_triangular(z).ok_or_else(|| Error::Factorization { context: "triangular solve".into() })?;
    Ok(log_norm_const::<T>(m) - logdet - w.norm_squared())
}
