//! GOSPA metric on 2D positions with optimal assignment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GospaParams<T: Real> {
    pub cutoff: T,
    pub order: T,
    pub alpha: T,
}

impl<T: Real> GospaParams<T> {
    pub fn new(cutoff: T, order: T, alpha: T) -> Result<Self> {
        if !(cutoff > T::zero()) || !(order >= T::one()) || !(alpha > T::zero() && alpha <= T::lit(2.0)) {
            return Err(Error::Validation("GOSPA needs c > 0, p >= 1 and 0 < alpha <= 2".into()));
        }
        Ok(Self { cutoff, order, alpha })
    }
}

impl Default for GospaParams<f64> {
    fn default() -> Self {
        Self { cutoff: 5.0, order: 1.0, alpha: 2.0 }
    }
}

/// `total` is the metric itself; the three components are in `p`-th power
/// units and sum to `total^p`. Assigned pairs farther apart than the cutoff
/// count half as a miss and half as a false estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct GospaResult<T: Real> {
    pub total: T,
    pub localization: T,
    pub missed: T,
    pub false_est: T,
    /// `(truth index, estimate index)` pairs closer than the cutoff.
    pub assignment: Vec<(usize, usize)>,
}

fn dist<T: Real>(a: [T; 2], b: [T; 2]) -> T {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

/// Minimum-cost assignment of every row to a distinct column for a
/// `rows x cols` cost matrix with `rows <= cols` (shortest augmenting path
/// with potentials). Returns the column of each row.
pub fn solve_assignment<T: Real>(cost: &[Vec<T>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    assert!(n <= m, "assignment needs rows <= cols");
    let inf = T::max_value().unwrap();
    // 1-based arrays, index 0 is the virtual source column
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of = vec![0usize; n];
    for j in 1..=m {
        if owner[j] != 0 {
            col_of[owner[j] - 1] = j - 1;
        }
    }
    col_of
}

pub fn gospa<T: Real>(truth: &[[T; 2]], est: &[[T; 2]], params: &GospaParams<T>) -> GospaResult<T> {
    let (c, p, alpha) = (params.cutoff, params.order, params.alpha);
    let cp = c.powf(p);
    let half = cp / T::lit(2.0);
    let swap = truth.len() > est.len();
    let (small, large) = if swap { (est, truth) } else { (truth, est) };
    let cost: Vec<Vec<T>> = small.iter().map(|a| large.iter().map(|b| dist(*a, *b).min(c).powf(p)).collect()).collect();
    let cols = solve_assignment(&cost);
    let mut localization = T::zero();
    let mut far = 0usize;
    let mut assignment = Vec::new();
    for (r, &col) in cols.iter().enumerate() {
        let d = dist(small[r], large[col]);
        if d < c {
            localization += d.powf(p);
            assignment.push(if swap { (col, r) } else { (r, col) });
        } else {
            far += 1;
        }
    }
    assignment.sort_unstable();
    let unmatched = T::lit((large.len() - small.len()) as f64) * cp / alpha;
    let far_half = T::lit(far as f64) * half;
    let (missed, false_est) = if swap { (unmatched + far_half, far_half) } else { (far_half, unmatched + far_half) };
    let total = (localization + missed + false_est).powf(T::one() / p);
    GospaResult { total, localization, missed, false_est, assignment }
}

#[derive(Clone, Debug)]
pub struct GospaSeries<T: Real> {
    pub per_step: Vec<GospaResult<T>>,
    pub window_mean: T,
}

/// Per-step GOSPA and the mean total over steps `window` (indices into the
/// series, end exclusive; the whole series if `None`).
pub fn gospa_series<T: Real>(
    truth: &[Vec<[T; 2]>],
    est: &[Vec<[T; 2]>],
    params: &GospaParams<T>,
    window: Option<std::ops::Range<usize>>,
) -> Result<GospaSeries<T>> {
    if truth.len() != est.len() {
        return Err(Error::Dimension { what: "GOSPA series steps", expected: truth.len(), found: est.len() });
    }
    let per_step: Vec<_> = truth.iter().zip(est).map(|(t, e)| gospa(t, e, params)).collect();
    let w = window.unwrap_or(0..per_step.len());
    if w.start >= w.end || w.end > per_step.len() {
        return Err(Error::Validation(format!("window {w:?} outside series of length {}", per_step.len())));
    }
    let sum = per_step[w.clone()].iter().fold(T::zero(), |a, r| a + r.total);
    let window_mean = sum / T::lit(w.len() as f64);
    Ok(GospaSeries { per_step, window_mean })
}
