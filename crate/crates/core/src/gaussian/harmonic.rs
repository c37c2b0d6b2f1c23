//! Exact fast evaluation of quadratic forms over separable harmonic atoms.
//!
//! An atom on an `outer x inner` grid has entries `a[o * inner + i] = u^o v^i`
//! with `|u| = |v| = 1`. For a Hermitian `A`, `a^H A a` depends on `A` only
//! through its lag sums `C[do][di] = sum A[m, m']` over index pairs whose
//! outer and inner offsets are `(do, di)`. Folding the Hermitian symmetry
//! leaves roughly `outer * (2 inner - 1)` complex products per atom instead of
//! `M^2`.

use crate::scalar::{CMatrix, CVector, Real, C};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HarmonicGrid {
    pub outer: usize,
    pub inner: usize,
}

impl HarmonicGrid {
    pub fn new(outer: usize, inner: usize) -> Self {
        Self { outer, inner }
    }

    pub fn dim(&self) -> usize {
        self.outer * self.inner
    }

    pub fn atom<T: Real>(&self, u: C<T>, v: C<T>) -> CVector<T> {
        let mut a = CVector::<T>::zeros(self.dim());
        let mut uo = C::new(T::one(), T::zero());
        for o in 0..self.outer {
            let mut p = uo;
            for i in 0..self.inner {
                a[o * self.inner + i] = p;
                p *= v;
            }
            uo *= u;
        }
        a
    }

    /// `a(u, v)^H w` by nested Horner evaluation in `conj(v)` and `conj(u)`.
    pub fn inner_product<T: Real>(&self, u: C<T>, v: C<T>, w: &CVector<T>) -> C<T> {
        debug_assert_eq!(w.len(), self.dim());
        let (uc, vc) = (u.conj(), v.conj());
        let mut acc = C::new(T::zero(), T::zero());
        for o in (0..self.outer).rev() {
            let row = &w.as_slice()[o * self.inner..(o + 1) * self.inner];
            let mut r = C::new(T::zero(), T::zero());
            for x in row.iter().rev() {
                r = r * vc + *x;
            }
            acc = acc * uc + r;
        }
        acc
    }
}

/// Lag sums of a Hermitian matrix on a [`HarmonicGrid`], restricted to the
/// half plane `do > 0` or `do = 0, di > 0`, plus the real zero-lag term.
#[derive(Clone, Debug)]
pub struct LagTable<T: Real> {
    grid: HarmonicGrid,
    zero: T,
    // Row `do` holds lags di = -(inner-1) ..= inner-1.
    rows: Vec<Vec<C<T>>>,
}

impl<T: Real> LagTable<T> {
    pub fn from_hermitian(grid: HarmonicGrid, a: &CMatrix<T>) -> Self {
        let (no, ni) = (grid.outer, grid.inner);
        assert_eq!(a.nrows(), grid.dim());
        let width = 2 * ni - 1;
        let mut rows = vec![vec![C::new(T::zero(), T::zero()); width]; no];
        let mut zero = T::zero();
        for m in 0..grid.dim() {
            let (mo, mi) = (m / ni, m % ni);
            for mp in 0..grid.dim() {
                let (po, pi) = (mp / ni, mp % ni);
                if po < mo {
                    continue;
                }
                let d_o = po - mo;
                let d_i = pi as isize - mi as isize;
                if d_o == 0 {
                    if d_i == 0 {
                        zero += a[(m, mp)].re;
                        continue;
                    }
                    if d_i < 0 {
                        continue;
                    }
                }
                rows[d_o][(d_i + ni as isize - 1) as usize] += a[(m, mp)];
            }
        }
        Self { grid, zero, rows }
    }

    pub fn grid(&self) -> HarmonicGrid {
        self.grid
    }

    /// `a(u, v)^H A a(u, v)`.
    pub fn quadratic_form(&self, u: C<T>, v: C<T>) -> T {
        let ni = self.grid.inner;
        let width = 2 * ni - 1;
        // v^k for k = -(ni-1) ..= ni-1, with v^{-1} = conj(v).
        let mut pw = vec![C::new(T::one(), T::zero()); width];
        let centre = ni - 1;
        for k in 1..ni {
            pw[centre + k] = pw[centre + k - 1] * v;
            pw[centre - k] = pw[centre + k].conj();
        }
        let mut acc = C::new(T::zero(), T::zero());
        for d_o in (0..self.grid.outer).rev() {
            let row = &self.rows[d_o];
            let start = if d_o == 0 { centre + 1 } else { 0 };
            let mut s = C::new(T::zero(), T::zero());
            for k in start..width {
                s += row[k] * pw[k];
            }
            acc = acc * u + s;
        }
        self.zero + T::lit(2.0) * acc.re
    }
}
