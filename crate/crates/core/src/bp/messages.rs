//! Incoming-message statistics and the three outgoing message families.
//!
//! Every message over a particle set is a log-weight vector on the shared
//! particles of that variable. Incoming (leave-one-out) messages are never
//! stored; they are rebuilt from the prediction and the stored outgoing
//! messages by subtracting the target term from the full sum.

use nalgebra::Complex;

use super::state::{degenerate, normalize_log, softmax_or, systematic_indices, NoiseBelief, PotentialObject};
use crate::error::{Error, Result};
use crate::gaussian::{
    compress_gram, rank1_from_scalars, CholeskyCovariance, CovarianceBase, DiagShiftEvaluator, HarmonicGrid, LagTable,
    LowRankUpdate, StructuredCovariance,
};
use crate::radar::{MeasurementFrame, RadarSensor};
use crate::scalar::{log_sum_exp, CMatrix, CVector};

const ONE: Complex<f64> = Complex { re: 1.0, im: 0.0 };

fn cr(x: f64) -> Complex<f64> {
    Complex::new(x, 0.0)
}

/// Per-step constants shared by all message computations.
#[derive(Clone, Debug)]
pub struct StepContext {
    pub grids: Vec<HarmonicGrid>,
    /// `z[i][j]`.
    pub z: Vec<Vec<CVector<f64>>>,
    /// Lower bound on the expected noise power, `[i][j]`.
    pub eta_floor: Vec<Vec<f64>>,
    pub b_eta: f64,
    pub rank_cap: usize,
    pub compress_tol: f64,
}

impl StepContext {
    pub fn new(
        sensors: &[RadarSensor<f64>],
        frame: &MeasurementFrame,
        b_eta: f64,
        rank_cap: usize,
        compress_tol: f64,
        eta_floor_rel: f64,
    ) -> Result<Self> {
        if frame.n_dict() != sensors.len() {
            return Err(Error::Dimension {
                what: "frame dictionaries",
                expected: sensors.len(),
                found: frame.n_dict(),
            });
        }
        for (s, &m) in sensors.iter().zip(&frame.dims) {
            if s.dim() != m {
                return Err(Error::Dimension { what: "frame dictionary dimension", expected: s.dim(), found: m });
            }
        }
        if !frame.is_finite() {
            return Err(Error::Validation(format!("frame {} has non-finite samples", frame.step)));
        }
        let z: Vec<Vec<CVector<f64>>> =
            (0..frame.n_dict()).map(|i| (0..frame.n_snapshots).map(|j| frame.snapshot(i, j)).collect()).collect();
        let eta_floor =
            z.iter().map(|zs| zs.iter().map(|v| eta_floor_rel * v.norm_squared() / v.len() as f64).collect()).collect();
        Ok(Self { grids: sensors.iter().map(|s| s.grid()).collect(), z, eta_floor, b_eta, rank_cap, compress_tol })
    }

    pub fn n_dict(&self) -> usize {
        self.z.len()
    }

    pub fn n_snapshots(&self) -> usize {
        self.z[0].len()
    }

    fn dim(&self, i: usize) -> usize {
        self.grids[i].dim()
    }
}

/// Sums of the power messages of one PO over snapshots, the building block
/// of every leave-one-out power message.
pub(crate) struct PowerSummary {
    /// `sum_j lambda1[i][j][p]`.
    sums: Vec<Vec<f64>>,
    /// `log(mean_p exp(sums[i][p]))`.
    lme: Vec<f64>,
    lambda0_total: f64,
}

impl PowerSummary {
    pub(crate) fn new(po: &PotentialObject) -> Self {
        let sums: Vec<Vec<f64>> = po
            .lambda1
            .iter()
            .map(|per_j| {
                let mut s = vec![0.0; per_j[0].len()];
                for l in per_j {
                    for (a, b) in s.iter_mut().zip(l) {
                        *a += b;
                    }
                }
                s
            })
            .collect();
        let lme = sums.iter().map(|s| log_sum_exp(s) - (s.len() as f64).ln()).collect();
        let lambda0_total = po.lambda0.iter().flatten().sum();
        Self { sums, lme, lambda0_total }
    }

    /// Log masses of `r = 1` and `r = 0` in the belief.
    pub(crate) fn belief_log_masses(&self, po: &PotentialObject) -> (f64, f64) {
        let m1 = po.pred_existence.ln() + self.lme.iter().sum::<f64>();
        let m0 = (1.0 - po.pred_existence).ln() + self.lambda0_total;
        (m1, m0)
    }

    /// Existence probability and conditional mean power `E[gamma | r = 1]`
    /// under the incoming power message of `(i, j)`.
    pub(crate) fn incoming(&self, po: &PotentialObject, i: usize, j: usize) -> Result<(f64, f64)> {
        let lw: Vec<f64> = self.sums[i].iter().zip(&po.lambda1[i][j]).map(|(s, l)| s - l).collect();
        let w = softmax_or(&lw, po.id, i, j, "power message has no mass")?;
        let mean = w.iter().zip(&po.power[i]).map(|(w, g)| w * g).sum::<f64>();
        if po.pred_existence <= 0.0 {
            return Ok((0.0, mean));
        }
        let own = log_sum_exp(&lw) - (lw.len() as f64).ln();
        let others: f64 = self.lme.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, v)| v).sum();
        let m1 = po.pred_existence.ln() + others + own;
        let m0 = (1.0 - po.pred_existence).ln() + self.lambda0_total - po.lambda0[i][j];
        let p1 = if m0 == f64::NEG_INFINITY { 1.0 } else { 1.0 / (1.0 + (m0 - m1).exp()) };
        if !p1.is_finite() {
            return Err(degenerate(po.id, i, j, "existence mass is not finite"));
        }
        Ok((p1, mean))
    }
}

/// `gamma_hat[n][i][j] = E[r gamma_i]` under the incoming power messages.
pub fn gamma_hats(pos: &[PotentialObject]) -> Result<Vec<Vec<Vec<f64>>>> {
    pos.iter()
        .map(|po| {
            let s = PowerSummary::new(po);
            (0..po.n_dict())
                .map(|i| {
                    (0..po.n_snapshots()).map(|j| s.incoming(po, i, j).map(|(p, g)| p * g)).collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

/// `sum_{i, j} kappa[i][j][p]`.
pub(crate) fn kappa_total(po: &PotentialObject) -> Vec<f64> {
    let mut t = vec![0.0; po.kin.len()];
    for k in po.kappa.iter().flatten() {
        for (a, b) in t.iter_mut().zip(k) {
            *a += b;
        }
    }
    t
}

/// Normalized weights of the incoming kinematic message of `(i, j)`.
pub(crate) fn kin_incoming(po: &PotentialObject, total: &[f64], i: usize, j: usize) -> Result<Vec<f64>> {
    let lw: Vec<f64> = total.iter().zip(&po.kappa[i][j]).map(|(t, k)| t - k).collect();
    softmax_or(&lw, po.id, i, j, "kinematic message has no mass")
}

/// Weighted support of at most `cap` points for a normalized weight
/// vector: all positive-weight particles when they fit, otherwise a
/// deterministic systematic draw with duplicates merged into weights.
pub fn sigma_support(weights: &[f64], cap: usize) -> Vec<(usize, f64)> {
    let live = weights.iter().filter(|&&w| w > 0.0).count();
    if live <= cap {
        return weights.iter().enumerate().filter(|(_, &w)| w > 0.0).map(|(p, &w)| (p, w)).collect();
    }
    let idx = systematic_indices(weights, cap, 0.5);
    let mut out: Vec<(usize, f64)> = Vec::new();
    let unit = 1.0 / cap as f64;
    for p in idx {
        match out.last_mut() {
            Some((q, w)) if *q == p => *w += unit,
            _ => out.push((p, unit)),
        }
    }
    out
}

/// `U = [sqrt(w_r) a(x_r)]`, so that `Sigma_hat = U U^H`.
fn support_factor(
    grid: &HarmonicGrid,
    phasors: &[(Complex<f64>, Complex<f64>)],
    support: &[(usize, f64)],
) -> CMatrix<f64> {
    let mut u = CMatrix::zeros(grid.dim(), support.len());
    for (c, &(p, w)) in support.iter().enumerate() {
        let (a, b) = phasors[p];
        let atom = grid.atom(a, b) * cr(w.sqrt());
        u.set_column(c, &atom);
    }
    u
}

/// Compressed factors `L[n][i][j]` with `L L^H ~= Sigma_hat`.
pub fn sigma_factors(ctx: &StepContext, pos: &[PotentialObject]) -> Result<Vec<Vec<Vec<CMatrix<f64>>>>> {
    pos.iter()
        .map(|po| {
            let total = kappa_total(po);
            (0..ctx.n_dict())
                .map(|i| {
                    (0..ctx.n_snapshots())
                        .map(|j| {
                            let w = kin_incoming(po, &total, i, j)?;
                            let sup = sigma_support(&w, ctx.rank_cap);
                            let u = support_factor(&ctx.grids[i], &po.phasors[i], &sup);
                            Ok(compress_gram(&u, ctx.compress_tol))
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

/// `eta_hat[i][j] = max(b_eta E[eta], floor)` under the incoming noise
/// messages.
pub fn eta_hats(ctx: &StepContext, nb: &NoiseBelief) -> Result<Vec<Vec<f64>>> {
    (0..ctx.n_dict())
        .map(|i| {
            let mut total = vec![0.0; nb.particles[i].len()];
            for nu in &nb.nu[i] {
                for (a, b) in total.iter_mut().zip(nu) {
                    *a += b;
                }
            }
            (0..ctx.n_snapshots())
                .map(|j| {
                    let lw: Vec<f64> = total.iter().zip(&nb.nu[i][j]).map(|(t, v)| t - v).collect();
                    let w = softmax_or(&lw, u64::MAX, i, j, "noise message has no mass")?;
                    let mean: f64 = w.iter().zip(&nb.particles[i]).map(|(w, e)| w * e).sum();
                    Ok((ctx.b_eta * mean).max(ctx.eta_floor[i][j]))
                })
                .collect()
        })
        .collect()
}

fn add_scaled_gram(acc: &mut CMatrix<f64>, l: &CMatrix<f64>, c: f64) {
    if l.ncols() == 0 || c == 0.0 {
        return;
    }
    acc.gemm(cr(c), l, &l.adjoint(), ONE);
}

/// `S[i][j] = sum_n gamma_hat Sigma_hat` from compressed factors.
pub fn signal_covariances(
    ctx: &StepContext,
    factors: &[Vec<Vec<CMatrix<f64>>>],
    gamma: &[Vec<Vec<f64>>],
) -> Vec<Vec<CMatrix<f64>>> {
    (0..ctx.n_dict())
        .map(|i| {
            (0..ctx.n_snapshots())
                .map(|j| {
                    let m = ctx.dim(i);
                    let mut s = CMatrix::zeros(m, m);
                    for (f, g) in factors.iter().zip(gamma) {
                        add_scaled_gram(&mut s, &f[i][j], g[i][j]);
                    }
                    s
                })
                .collect()
        })
        .collect()
}

/// `S - gamma_n L_n L_n^H + eta I`: the covariance of everything except PO
/// `n`.
fn leave_one_out_base(s: &CMatrix<f64>, l: &CMatrix<f64>, gamma: f64, eta: f64) -> CMatrix<f64> {
    let mut b = s.clone();
    add_scaled_gram(&mut b, l, -gamma);
    for k in 0..b.nrows() {
        b[(k, k)] += cr(eta);
    }
    b
}

fn factor_base(b: &CMatrix<f64>, po: u64, i: usize, j: usize, what: &str) -> Result<CholeskyCovariance<f64>> {
    CholeskyCovariance::factor(b)
        .map_err(|e| e.with_context(format!("{what} base of PO {po}, dictionary {i}, snapshot {j}")))
}

/// New power messages `(lambda1, lambda0)` for every PO, from the current
/// statistics.
#[allow(clippy::type_complexity)]
pub fn lambda_messages(
    ctx: &StepContext,
    pos: &[PotentialObject],
    factors: &[Vec<Vec<CMatrix<f64>>>],
    gamma: &[Vec<Vec<f64>>],
    eta: &[Vec<f64>],
) -> Result<Vec<(Vec<Vec<Vec<f64>>>, Vec<Vec<f64>>)>> {
    let s = signal_covariances(ctx, factors, gamma);
    pos.iter()
        .enumerate()
        .map(|(n, po)| {
            let mut l1 = vec![vec![Vec::new(); ctx.n_snapshots()]; ctx.n_dict()];
            let mut l0 = vec![vec![0.0; ctx.n_snapshots()]; ctx.n_dict()];
            for i in 0..ctx.n_dict() {
                for j in 0..ctx.n_snapshots() {
                    let b = leave_one_out_base(&s[i][j], &factors[n][i][j], gamma[n][i][j], eta[i][j]);
                    let ch = factor_base(&b, po.id, i, j, "power message")?;
                    let lr = LowRankUpdate::new(&ch, &factors[n][i][j], &ctx.z[i][j]);
                    let ln_p = (po.power[i].len() as f64).ln();
                    let mut v: Vec<f64> = po.power[i].iter().map(|&g| lr.logpdf(g)).collect();
                    let zero = lr.logpdf(0.0);
                    let mut all: Vec<f64> = v.iter().map(|x| x - ln_p).collect();
                    all.push(zero);
                    let z = log_sum_exp(&all);
                    if !z.is_finite() {
                        return Err(degenerate(po.id, i, j, "power message is not finite"));
                    }
                    for x in &mut v {
                        *x -= z;
                    }
                    l1[i][j] = v;
                    l0[i][j] = zero - z;
                }
            }
            Ok((l1, l0))
        })
        .collect()
}

/// New noise messages `nu[i][j][q]`.
pub fn nu_messages(ctx: &StepContext, nb: &NoiseBelief, s: &[Vec<CMatrix<f64>>]) -> Result<Vec<Vec<Vec<f64>>>> {
    (0..ctx.n_dict())
        .map(|i| {
            (0..ctx.n_snapshots())
                .map(|j| {
                    let eig = StructuredCovariance::precompute(&s[i][j])
                        .map_err(|e| e.with_context(format!("noise message, dictionary {i}, snapshot {j}")))?;
                    let ev = DiagShiftEvaluator::new(&eig, &ctx.z[i][j])?;
                    let mut v: Vec<f64> = nb.particles[i].iter().map(|&e| ev.logpdf_unchecked(e)).collect();
                    normalize_log(&mut v).ok_or_else(|| degenerate(u64::MAX, i, j, "noise message is not finite"))?;
                    Ok(v)
                })
                .collect()
        })
        .collect()
}

/// New kinematic messages `kappa[i][j][p]` for every PO.
pub fn kappa_messages(
    ctx: &StepContext,
    pos: &[PotentialObject],
    factors: &[Vec<Vec<CMatrix<f64>>>],
    gamma: &[Vec<Vec<f64>>],
    s: &[Vec<CMatrix<f64>>],
    eta: &[Vec<f64>],
) -> Result<Vec<Vec<Vec<Vec<f64>>>>> {
    pos.iter()
        .enumerate()
        .map(|(n, po)| {
            (0..ctx.n_dict())
                .map(|i| {
                    (0..ctx.n_snapshots())
                        .map(|j| {
                            let b = leave_one_out_base(&s[i][j], &factors[n][i][j], gamma[n][i][j], eta[i][j]);
                            let ch = factor_base(&b, po.id, i, j, "kinematic message")?;
                            kappa_one(ctx, po, &ch, gamma[n][i][j], i, j)
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn kappa_one(
    ctx: &StepContext,
    po: &PotentialObject,
    base: &CholeskyCovariance<f64>,
    gamma: f64,
    i: usize,
    j: usize,
) -> Result<Vec<f64>> {
    let grid = ctx.grids[i];
    let z = &ctx.z[i][j];
    let inv = base.inverse();
    let w = &inv * z;
    let zq = z.dotc(&w).re;
    let lag = LagTable::from_hermitian(grid, &inv);
    let (m, logdet) = (grid.dim(), base.logdet());
    let mut v: Vec<f64> = po.phasors[i]
        .iter()
        .map(|&(u, vv)| {
            let q = lag.quadratic_form(u, vv);
            let x = grid.inner_product(u, vv, &w).norm_sqr();
            rank1_from_scalars(m, logdet, zq, q, x, gamma)
        })
        .collect();
    normalize_log(&mut v).ok_or_else(|| degenerate(po.id, i, j, "kinematic message is not finite"))?;
    Ok(v)
}

/// Moment statistics with full `Sigma_hat` matrices, for inspection and
/// testing; the tracker itself works with compressed factors.
#[derive(Clone, Debug)]
pub struct MomentStats {
    pub gamma_hat: Vec<Vec<Vec<f64>>>,
    pub sigma_hat: Vec<Vec<Vec<CMatrix<f64>>>>,
    pub eta_hat: Vec<Vec<f64>>,
    pub b_eta: f64,
}

pub fn compute_moment_stats(ctx: &StepContext, pos: &[PotentialObject], nb: &NoiseBelief) -> Result<MomentStats> {
    let sigma_hat = pos
        .iter()
        .map(|po| {
            let total = kappa_total(po);
            (0..ctx.n_dict())
                .map(|i| {
                    (0..ctx.n_snapshots())
                        .map(|j| {
                            let w = kin_incoming(po, &total, i, j)?;
                            let u = support_factor(&ctx.grids[i], &po.phasors[i], &sigma_support(&w, ctx.rank_cap));
                            Ok(&u * u.adjoint())
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MomentStats { gamma_hat: gamma_hats(pos)?, sigma_hat, eta_hat: eta_hats(ctx, nb)?, b_eta: ctx.b_eta })
}

impl MomentStats {
    fn others(&self, n: Option<usize>, i: usize, j: usize) -> CMatrix<f64> {
        let m = self.sigma_hat.first().map_or(0, |s| s[i][j].nrows());
        let mut c = CMatrix::zeros(m, m);
        for (k, (g, s)) in self.gamma_hat.iter().zip(&self.sigma_hat).enumerate() {
            if Some(k) != n {
                c += &s[i][j] * cr(g[i][j]);
            }
        }
        c
    }

    fn add_identity(mut c: CMatrix<f64>, eta: f64) -> CMatrix<f64> {
        for k in 0..c.nrows() {
            c[(k, k)] += cr(eta);
        }
        c
    }

    /// `r gamma Sigma_n + sum_{n' != n} gamma_hat Sigma + eta_hat I`.
    pub fn cov_lambda(&self, n: usize, i: usize, j: usize, gamma: f64, r: bool) -> CMatrix<f64> {
        let own = if r { &self.sigma_hat[n][i][j] * cr(gamma) } else { self.sigma_hat[n][i][j].clone() * cr(0.0) };
        Self::add_identity(self.others(Some(n), i, j) + own, self.eta_hat[i][j])
    }

    /// `sum_n gamma_hat Sigma + eta I`.
    pub fn cov_nu(&self, i: usize, j: usize, eta: f64, dim: usize) -> CMatrix<f64> {
        let c = if self.sigma_hat.is_empty() { CMatrix::zeros(dim, dim) } else { self.others(None, i, j) };
        Self::add_identity(c, eta)
    }

    /// `gamma_hat_n a a^H + sum_{n' != n} gamma_hat Sigma + eta_hat I`.
    pub fn cov_kappa(&self, n: usize, i: usize, j: usize, a: &CVector<f64>) -> CMatrix<f64> {
        let own = (a * a.adjoint()) * cr(self.gamma_hat[n][i][j]);
        Self::add_identity(self.others(Some(n), i, j) + own, self.eta_hat[i][j])
    }
}
