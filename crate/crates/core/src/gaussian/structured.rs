use nalgebra::DVector;

use super::dense::{check_hermitian, cholesky_jittered};
use super::eigen::hermitian_eigen;
use super::{log_norm_const, JITTER_REL};
use crate::error::{Error, Result};
use crate::scalar::{CMatrix, CVector, Real, C};

/// A factored Hermitian positive definite base covariance `B`.
///
/// Implementors expose a whitening operator `W` with `B^{-1} = W^H W`; every
/// structured evaluator is written against this trait so the same update
/// formulas serve eigen- and Cholesky-factored bases.
pub trait CovarianceBase<T: Real> {
    fn dim(&self) -> usize;

    fn logdet(&self) -> T;

    fn whiten(&self, v: &CVector<T>) -> CVector<T>;

    fn whiten_matrix(&self, u: &CMatrix<T>) -> CMatrix<T>;

    /// Explicit `B^{-1}`.
    fn inverse(&self) -> CMatrix<T>;

    fn logpdf(&self, z: &CVector<T>) -> T {
        log_norm_const::<T>(self.dim()) - self.logdet() - self.whiten(z).norm_squared()
    }
}

/// Eigendecomposition of a Hermitian PSD matrix with eigenvalues clamped at
/// `1e-12 * trace / M`.
#[derive(Clone, Debug)]
pub struct StructuredCovariance<T: Real> {
    eigvals: DVector<T>,
    eigvecs: CMatrix<T>,
    logdet: T,
    jitter: T,
}

impl<T: Real> StructuredCovariance<T> {
    pub fn precompute(s: &CMatrix<T>) -> Result<Self> {
        check_hermitian(s, "base covariance")?;
        let m = s.nrows();
        if m == 0 {
            return Err(Error::Validation("base covariance is empty".into()));
        }
        let trace = (0..m).fold(T::zero(), |acc, i| acc + s[(i, i)].re);
        let jitter = (T::lit(JITTER_REL) * trace / T::lit(m as f64)).max(T::zero());
        let (eigenvalues, eigenvectors) = hermitian_eigen(s);
        let max_abs = eigenvalues.iter().fold(T::zero(), |a, &l| a.max(l.abs()));
        let floor = -T::lit(1e-8) * max_abs;
        if let Some(bad) = eigenvalues.iter().find(|&&l| l < floor || !l.is_finite()) {
            return Err(Error::Validation(format!("base covariance is not PSD (eigenvalue {})", bad.to_f64_lossy())));
        }
        let eigvals = eigenvalues.map(|l| l.max(jitter));
        let logdet = eigvals.iter().fold(T::zero(), |acc, &l| acc + l.ln());
        Ok(Self { eigvals, eigvecs: eigenvectors, logdet, jitter })
    }

    pub fn eigvals(&self) -> &DVector<T> {
        &self.eigvals
    }

    pub fn eigvecs(&self) -> &CMatrix<T> {
        &self.eigvecs
    }

    pub fn jitter(&self) -> T {
        self.jitter
    }

    pub fn is_positive_definite(&self) -> bool {
        self.eigvals.iter().all(|&l| l > T::zero())
    }

    /// `Q diag(lambda) Q^H` with the clamped eigenvalues.
    pub fn reconstruct(&self) -> CMatrix<T> {
        let mut scaled = self.eigvecs.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= C::new(self.eigvals[k], T::zero());
        }
        scaled * self.eigvecs.adjoint()
    }

    pub fn logpdf_diag_shift(&self, eta: T, z: &CVector<T>) -> Result<T> {
        DiagShiftEvaluator::new(self, z)?.logpdf(eta)
    }

    fn require_pd(&self) -> Result<()> {
        if self.is_positive_definite() {
            Ok(())
        } else {
            Err(Error::Factorization { context: "base covariance is singular".into() })
        }
    }
}

impl<T: Real> CovarianceBase<T> for StructuredCovariance<T> {
    fn dim(&self) -> usize {
        self.eigvals.len()
    }

    fn logdet(&self) -> T {
        self.logdet
    }

    fn whiten(&self, v: &CVector<T>) -> CVector<T> {
        let mut y = self.eigvecs.ad_mul(v);
        for (k, yk) in y.iter_mut().enumerate() {
            *yk = yk.unscale(self.eigvals[k].sqrt());
        }
        y
    }

    fn whiten_matrix(&self, u: &CMatrix<T>) -> CMatrix<T> {
        let mut y = self.eigvecs.ad_mul(u);
        for (k, mut row) in y.row_iter_mut().enumerate() {
            row.unscale_mut(self.eigvals[k].sqrt());
        }
        y
    }

    fn inverse(&self) -> CMatrix<T> {
        let mut scaled = self.eigvecs.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col.unscale_mut(self.eigvals[k]);
        }
        scaled * self.eigvecs.adjoint()
    }
}

/// Cholesky-factored base, cheaper to build than [`StructuredCovariance`]
/// when no diagonal-shift family is needed.
#[derive(Clone, Debug)]
pub struct CholeskyCovariance<T: Real> {
    l: CMatrix<T>,
    logdet: T,
    jitter: T,
}

impl<T: Real> CholeskyCovariance<T> {
    /// Factors `b`; the caller guarantees it is Hermitian.
    pub fn factor(b: &CMatrix<T>) -> Result<Self> {
        let (ch, jitter) = cholesky_jittered(b, "base covariance")?;
        let l = ch.unpack();
        let logdet = (0..l.nrows()).fold(T::zero(), |acc, i| acc + l[(i, i)].re.ln()) * T::lit(2.0);
        Ok(Self { l, logdet, jitter })
    }

    pub fn factor_checked(b: &CMatrix<T>) -> Result<Self> {
        check_hermitian(b, "base covariance")?;
        Self::factor(b)
    }

    pub fn jitter(&self) -> T {
        self.jitter
    }

    pub fn lower(&self) -> &CMatrix<T> {
        &self.l
    }
}

impl<T: Real> CovarianceBase<T> for CholeskyCovariance<T> {
    fn dim(&self) -> usize {
        self.l.nrows()
    }

    fn logdet(&self) -> T {
        self.logdet
    }

    fn whiten(&self, v: &CVector<T>) -> CVector<T> {
        let mut y = v.clone();
        self.l.solve_lower_triangular_mut(&mut y);
        y
    }

    fn whiten_matrix(&self, u: &CMatrix<T>) -> CMatrix<T> {
        let mut y = u.clone();
        self.l.solve_lower_triangular_mut(&mut y);
        y
    }

    fn inverse(&self) -> CMatrix<T> {
        let m = self.l.nrows();
        let mut linv = CMatrix::<T>::identity(m, m);
        self.l.solve_lower_triangular_mut(&mut linv);
        linv.ad_mul(&linv)
    }
}

/// An atom whitened against a particular base, `W a` and `a^H B^{-1} a`.
#[derive(Clone, Debug)]
pub struct WhitenedVector<T: Real> {
    pub w: CVector<T>,
    pub norm_sqr: T,
}

impl<T: Real> WhitenedVector<T> {
    pub fn new<B: CovarianceBase<T>>(base: &B, a: &CVector<T>) -> Self {
        let w = base.whiten(a);
        let norm_sqr = w.norm_squared();
        Self { w, norm_sqr }
    }
}

/// Evaluates `log CN(z; 0, B + c a a^H)` for many `(a, c)` against one base
/// and one measurement, via the matrix determinant lemma and
/// Sherman-Morrison.
#[derive(Clone, Debug)]
pub struct Rank1Evaluator<T: Real> {
    m: usize,
    logdet: T,
    wz: CVector<T>,
    zq: T,
}

impl<T: Real> Rank1Evaluator<T> {
    pub fn new<B: CovarianceBase<T>>(base: &B, z: &CVector<T>) -> Self {
        let wz = base.whiten(z);
        let zq = wz.norm_squared();
        Self { m: base.dim(), logdet: base.logdet(), wz, zq }
    }

    pub fn base_logpdf(&self) -> T {
        log_norm_const::<T>(self.m) - self.logdet - self.zq
    }

    /// `O(M)` given a whitened atom.
    pub fn logpdf(&self, a: &WhitenedVector<T>, c: T) -> T {
        let cross = a.w.dotc(&self.wz).norm_sqr();
        rank1_from_scalars(self.m, self.logdet, self.zq, a.norm_sqr, cross, c)
    }
}

/// Rank-1 update in terms of `q = a^H B^{-1} a` and `x = |a^H B^{-1} z|^2`.
#[inline]
pub(crate) fn rank1_from_scalars<T: Real>(m: usize, logdet: T, zq: T, q: T, x: T, c: T) -> T {
    let denom = T::one() + c * q;
    log_norm_const::<T>(m) - logdet - denom.ln() - (zq - c * x / denom)
}

pub fn logpdf_rank1_update<T: Real>(base: &StructuredCovariance<T>, a: &CVector<T>, c: T, z: &CVector<T>) -> Result<T> {
    check_nonneg(c, "rank-1 scale")?;
    check_len(base.dim(), a.len(), "atom")?;
    check_len(base.dim(), z.len(), "measurement")?;
    base.require_pd()?;
    let eval = Rank1Evaluator::new(base, z);
    Ok(eval.logpdf(&WhitenedVector::new(base, a), c))
}

/// Precomputation for `log CN(z; 0, B + c U U^H)` as a function of the scalar
/// `c`. Uses the `R x R` Gram eigenproblem when `R < M / 2`, otherwise the
/// `M x M` whitened eigenproblem; either way each `c` costs `O(min(R, M))`.
#[derive(Clone, Debug)]
pub struct LowRankUpdate<T: Real> {
    m: usize,
    logdet: T,
    zq: T,
    mu: Vec<T>,
    proj: Vec<T>,
}

impl<T: Real> LowRankUpdate<T> {
    pub fn new<B: CovarianceBase<T>>(base: &B, u: &CMatrix<T>, z: &CVector<T>) -> Self {
        let m = base.dim();
        let r = u.ncols();
        let wz = base.whiten(z);
        let zq = wz.norm_squared();
        if r == 0 {
            return Self { m, logdet: base.logdet(), zq, mu: Vec::new(), proj: Vec::new() };
        }
        let k = base.whiten_matrix(u);
        let (mu, proj) = if 2 * r < m {
            let gram = k.ad_mul(&k);
            let (vals, vecs) = hermitian_eigen(&gram);
            let b = k.ad_mul(&wz);
            let y = vecs.ad_mul(&b);
            let mu: Vec<T> = vals.iter().map(|&l| l.max(T::zero())).collect();
            let proj = y.iter().map(|v| v.norm_sqr()).collect();
            (mu, proj)
        } else {
            let outer = &k * k.adjoint();
            let (vals, vecs) = hermitian_eigen(&outer);
            let y = vecs.ad_mul(&wz);
            let mu: Vec<T> = vals.iter().map(|&l| l.max(T::zero())).collect();
            let proj = y.iter().zip(&mu).map(|(v, &l)| v.norm_sqr() * l).collect();
            (mu, proj)
        };
        Self { m, logdet: base.logdet(), zq, mu, proj }
    }

    pub fn logpdf(&self, c: T) -> T {
        let mut logdet = self.logdet;
        let mut quad = self.zq;
        for (&mu, &p) in self.mu.iter().zip(&self.proj) {
            let d = T::one() + c * mu;
            logdet += d.ln();
            quad -= c * p / d;
        }
        log_norm_const::<T>(self.m) - logdet - quad
    }
}

pub fn logpdf_lowrank_scaled<T: Real>(
    base: &StructuredCovariance<T>,
    u: &CMatrix<T>,
    c: T,
    z: &CVector<T>,
) -> Result<T> {
    check_nonneg(c, "low-rank scale")?;
    check_len(base.dim(), u.nrows(), "low-rank factor rows")?;
    check_len(base.dim(), z.len(), "measurement")?;
    if u.ncols() > base.dim() {
        return Err(Error::Validation(format!(
            "low-rank factor has {} columns for dimension {}",
            u.ncols(),
            base.dim()
        )));
    }
    base.require_pd()?;
    Ok(LowRankUpdate::new(base, u, z).logpdf(c))
}

/// `log CN(z; 0, S + eta I)` for many `eta`, `O(M)` each after projecting `z`
/// onto the eigenbasis of `S` once.
#[derive(Clone, Debug)]
pub struct DiagShiftEvaluator<T: Real> {
    eigvals: Vec<T>,
    y2: Vec<T>,
}

impl<T: Real> DiagShiftEvaluator<T> {
    pub fn new(s: &StructuredCovariance<T>, z: &CVector<T>) -> Result<Self> {
        check_len(s.dim(), z.len(), "measurement")?;
        let y = s.eigvecs().ad_mul(z);
        Ok(Self { eigvals: s.eigvals().iter().copied().collect(), y2: y.iter().map(|v| v.norm_sqr()).collect() })
    }

    pub fn logpdf(&self, eta: T) -> Result<T> {
        if !(eta > T::zero()) {
            return Err(Error::Validation(format!("noise power must be positive, got {}", eta.to_f64_lossy())));
        }
        Ok(self.logpdf_unchecked(eta))
    }

    #[inline]
    pub fn logpdf_unchecked(&self, eta: T) -> T {
        let mut acc = log_norm_const::<T>(self.eigvals.len());
        for (&l, &y2) in self.eigvals.iter().zip(&self.y2) {
            let d = l + eta;
            acc -= d.ln() + y2 / d;
        }
        acc
    }
}

pub fn logpdf_diag_shift<T: Real>(s: &StructuredCovariance<T>, eta: T, z: &CVector<T>) -> Result<T> {
    s.logpdf_diag_shift(eta, z)
}

/// Pivoted Cholesky compression of `U U^H`: returns `L` with
/// `L L^H ~= U U^H` and a dropped (PSD) remainder of trace at most
/// `rel_tol * trace(U U^H)`. Only the pivot columns of `U U^H` are formed,
/// `O(M R r)` for output rank `r`.
pub fn compress_gram<T: Real>(u: &CMatrix<T>, rel_tol: T) -> CMatrix<T> {
    let (m, r) = u.shape();
    let mut diag: Vec<T> = (0..m).map(|k| u.row(k).iter().fold(T::zero(), |a, x| a + x.norm_sqr())).collect();
    let trace = diag.iter().fold(T::zero(), |a, &d| a + d);
    let stop = rel_tol * trace;
    let mut cols: Vec<CVector<T>> = Vec::new();
    let mut remaining = trace;
    while cols.len() < m.min(r) && remaining > stop {
        let (piv, &dmax) =
            diag.iter().enumerate().fold((0, &T::zero()), |best, (k, d)| if *d > *best.1 { (k, d) } else { best });
        if !(dmax > T::zero()) {
            break;
        }
        // column `piv` of U U^H minus what the previous columns explain
        let row = u.row(piv).adjoint();
        let mut c = u * row;
        for l in &cols {
            let s = l[piv].conj();
            c.axpy(-s, l, C::new(T::one(), T::zero()));
        }
        c.unscale_mut(dmax.sqrt());
        for (k, d) in diag.iter_mut().enumerate() {
            *d = (*d - c[k].norm_sqr()).max(T::zero());
        }
        diag[piv] = T::zero();
        remaining = diag.iter().fold(T::zero(), |a, &d| a + d);
        cols.push(c);
    }
    if cols.is_empty() {
        return CMatrix::zeros(m, 0);
    }
    CMatrix::from_columns(&cols)
}

fn check_nonneg<T: Real>(c: T, what: &str) -> Result<()> {
    if c >= T::zero() && c.is_finite() {
        Ok(())
    } else {
        Err(Error::Validation(format!("{what} must be finite and >= 0, got {}", c.to_f64_lossy())))
    }
}

fn check_len(expected: usize, found: usize, what: &'static str) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { what, expected, found })
    }
}
