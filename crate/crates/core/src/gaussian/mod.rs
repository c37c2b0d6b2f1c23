//! Zero-mean circular complex Gaussian log-densities with structured
//! covariances.
//!
//! Every outgoing message of the tracker is a density `CN(z; 0, C)` where `C`
//! is a base covariance plus a cheap update: a rank-1 term `c a a^H`, a scaled
//! low-rank term `c U U^H`, or a diagonal shift `eta I`. The evaluators here
//! factor the base once and then evaluate each particle at `O(M)` (rank-1,
//! diagonal shift) or `O(R)` (low-rank) cost. [`harmonic`] adds an exact
//! shortcut for atoms with a separable harmonic structure, which the radar
//! dictionary has.

mod dense;
mod eigen;
pub mod harmonic;
mod structured;

pub(crate) use structured::rank1_from_scalars;

pub use dense::{cgauss_logpdf_dense, check_hermitian, cholesky_jittered, JITTER_RETRIES};
pub use eigen::hermitian_eigen;
pub use harmonic::{HarmonicGrid, LagTable};
pub use structured::{
    compress_gram, logpdf_diag_shift, logpdf_lowrank_scaled, logpdf_rank1_update, CholeskyCovariance, CovarianceBase,
    DiagShiftEvaluator, LowRankUpdate, Rank1Evaluator, StructuredCovariance, WhitenedVector,
};

use crate::scalar::Real;

/// `-M log(pi)`, the normalizer of an `M`-variate circular complex Gaussian.
#[inline]
pub fn log_norm_const<T: Real>(m: usize) -> T {
    -T::lit(m as f64) * T::pi().ln()
}

/// Relative jitter applied to the eigenvalues or diagonal of a covariance
/// before its log-determinant is taken.
pub const JITTER_REL: f64 = 1e-12;
