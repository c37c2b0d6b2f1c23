//! Scalar abstraction shared by the numeric kernels.

use nalgebra::{Complex, DMatrix, DVector, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating point scalar usable by the Gaussian kernels, the dictionary
/// geometry and the assignment metric: `f32` or `f64`.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Default + Send + Sync + 'static {
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type C<T> = Complex<T>;
pub type CVector<T> = DVector<Complex<T>>;
pub type CMatrix<T> = DMatrix<Complex<T>>;

/// `exp(j * phase)`.
#[inline]
pub fn cis<T: Real>(phase: T) -> Complex<T> {
    Complex::new(phase.cos(), phase.sin())
}

/// Numerically stable `log(sum(exp(x)))`. Returns `-inf` for an empty or
/// all `-inf` input.
pub fn log_sum_exp<T: Real>(xs: &[T]) -> T {
    let mut max = T::min_value().unwrap();
    let mut any = false;
    for &x in xs {
        if x > max {
            max = x;
            any = true;
        }
    }
    let neg_inf = -T::max_value().unwrap() * T::lit(2.0);
    if !any || !max.is_finite() {
        return if any { max } else { neg_inf };
    }
    let mut acc = T::zero();
    for &x in xs {
        acc += (x - max).exp();
    }
    max + acc.ln()
}
