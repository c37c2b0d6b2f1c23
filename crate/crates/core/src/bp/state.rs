use nalgebra::{Complex, Vector4};

use crate::error::{Error, Result};
use crate::scalar::log_sum_exp;

/// A potential object: shared particle sets for its kinematic state and
/// its per-dictionary signal powers, plus the log weights of every
/// outgoing message over those sets.
///
/// The existence variable is carried jointly with the powers: the `r = 1`
/// branch is represented by the power particles, the `r = 0` branch by a
/// single scalar mass and no power samples.
#[derive(Clone, Debug)]
pub struct PotentialObject {
    pub id: u64,
    pub birth_step: usize,
    pub kin: Vec<Vector4<f64>>,
    /// `power[i][p]`.
    pub power: Vec<Vec<f64>>,
    /// Existence probability of the current belief.
    pub existence: f64,
    /// Predicted existence probability `psi(r = 1)` of the current step.
    pub pred_existence: f64,
    /// Atom phasors `(u, v)` of every kinematic particle, `[i][p]`.
    pub phasors: Vec<Vec<(Complex<f64>, Complex<f64>)>>,
    /// Outgoing kinematic messages `kappa[i][j][p]`, normalized so that
    /// `sum_p exp = 1`.
    pub kappa: Vec<Vec<Vec<f64>>>,
    /// Outgoing power messages for `r = 1`, `lambda1[i][j][p]`.
    pub lambda1: Vec<Vec<Vec<f64>>>,
    /// Outgoing power messages for `r = 0`, `lambda0[i][j]`. Together with
    /// `lambda1` normalized as `sum_p exp(lambda1) / P + exp(lambda0) = 1`.
    pub lambda0: Vec<Vec<f64>>,
}

impl PotentialObject {
    pub(crate) fn reset_messages(&mut self, n_snapshots: usize) {
        let ni = self.power.len();
        let (px, pg) = (self.kin.len(), self.power[0].len());
        let flat_k = -(px as f64).ln();
        self.kappa = vec![vec![vec![flat_k; px]; n_snapshots]; ni];
        // equal mass on r = 0 and on every r = 1 particle
        let half = 0.5f64.ln();
        self.lambda1 = vec![vec![vec![half; pg]; n_snapshots]; ni];
        self.lambda0 = vec![vec![half; n_snapshots]; ni];
    }

    pub fn n_dict(&self) -> usize {
        self.power.len()
    }

    pub fn n_snapshots(&self) -> usize {
        self.kappa.first().map_or(0, |k| k.len())
    }

    /// MMSE state under normalized weights.
    pub fn mean_state(&self, weights: &[f64]) -> [f64; 4] {
        let mut m = Vector4::zeros();
        for (x, &w) in self.kin.iter().zip(weights) {
            m += x * w;
        }
        [m[0], m[1], m[2], m[3]]
    }
}

/// Per-dictionary noise-power particles and their outgoing message log
/// weights `nu[i][j][q]` (normalized, `sum_q exp = 1`).
#[derive(Clone, Debug)]
pub struct NoiseBelief {
    pub particles: Vec<Vec<f64>>,
    pub nu: Vec<Vec<Vec<f64>>>,
}

impl NoiseBelief {
    pub(crate) fn reset_messages(&mut self, n_snapshots: usize) {
        self.nu = self.particles.iter().map(|p| vec![vec![-(p.len() as f64).ln(); p.len()]; n_snapshots]).collect();
    }
}

/// Normalizes log weights in place so that `sum exp = 1`; returns the
/// log normalizer.
pub(crate) fn normalize_log(w: &mut [f64]) -> Option<f64> {
    let z = log_sum_exp(w);
    if !z.is_finite() {
        return None;
    }
    for x in w.iter_mut() {
        *x -= z;
    }
    Some(z)
}

/// Linear-domain weights from log weights, normalized to sum to one.
pub(crate) fn softmax(logw: &[f64]) -> Option<Vec<f64>> {
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let mut w: Vec<f64> = logw.iter().map(|x| (x - max).exp()).collect();
    let s: f64 = w.iter().sum();
    if !(s > 0.0) || !s.is_finite() {
        return None;
    }
    for x in &mut w {
        *x /= s;
    }
    Some(w)
}

pub(crate) fn degenerate(po: u64, dict: usize, snapshot: usize, what: &'static str) -> Error {
    Error::DegenerateMessage { po, dict, snapshot, what }
}

pub(crate) fn softmax_or(logw: &[f64], po: u64, dict: usize, snapshot: usize, what: &'static str) -> Result<Vec<f64>> {
    softmax(logw).ok_or_else(|| degenerate(po, dict, snapshot, what))
}

/// Systematic resampling with a single uniform offset `u0` in `[0, 1)`;
/// returns the selected indices in increasing order.
pub fn systematic_indices(weights: &[f64], n: usize, u0: f64) -> Vec<usize> {
    let mut out = Vec::with_capacity(n);
    let mut cum = weights.first().copied().unwrap_or(0.0);
    let mut k = 0;
    let step = 1.0 / n as f64;
    for s in 0..n {
        let target = (s as f64 + u0) * step;
        while target >= cum && k + 1 < weights.len() {
            k += 1;
            cum += weights[k];
        }
        out.push(k);
    }
    out
}
