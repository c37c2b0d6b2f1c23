//! Matched-filter spectrum, matching-pursuit detector and a simple
//! detect-then-track baseline (matching pursuit followed by a global
//! nearest-neighbour Kalman tracker).

mod dtt;

pub use dtt::{BaselineConfig, BaselineTrack, BaselineTracker, TrackStatus};

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radar::{MeasurementFrame, RadarSensor};
use crate::scalar::CVector;

/// Grid points with their atoms precomputed for every dictionary.
#[derive(Clone, Debug)]
pub struct DictionaryGrid {
    pub points: Vec<[f64; 2]>,
    /// `atoms[i][g]`.
    atoms: Vec<Vec<CVector<f64>>>,
}

impl DictionaryGrid {
    pub fn new(sensors: &[RadarSensor<f64>], points: Vec<[f64; 2]>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Validation("detector grid is empty".into()));
        }
        let atoms = sensors
            .iter()
            .map(|s| points.iter().map(|&p| s.dictionary_eval(p)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { points, atoms })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn n_dict(&self) -> usize {
        self.atoms.len()
    }

    pub fn atom(&self, i: usize, g: usize) -> &CVector<f64> {
        &self.atoms[i][g]
    }

    fn check(&self, frame: &MeasurementFrame) -> Result<()> {
        if frame.n_dict() != self.n_dict() {
            return Err(Error::Dimension {
                what: "frame dictionaries",
                expected: self.n_dict(),
                found: frame.n_dict(),
            });
        }
        for (i, &m) in frame.dims.iter().enumerate() {
            if m != self.atoms[i][0].len() {
                return Err(Error::Dimension {
                    what: "frame dictionary dimension",
                    expected: self.atoms[i][0].len(),
                    found: m,
                });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumGrid {
    pub centers: Vec<[f64; 2]>,
    pub powers: Vec<f64>,
}

impl SpectrumGrid {
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (g, &p) in self.powers.iter().enumerate() {
            if p > self.powers[best] {
                best = g;
            }
        }
        best
    }
}

/// `prod_i sum_j |a_i(p)^H z_ij|^2` on every grid point.
pub fn bartlett(frame: &MeasurementFrame, grid: &DictionaryGrid) -> Result<SpectrumGrid> {
    grid.check(frame)?;
    let snaps: Vec<Vec<CVector<f64>>> =
        (0..frame.n_dict()).map(|i| (0..frame.n_snapshots).map(|j| frame.snapshot(i, j)).collect()).collect();
    let powers = (0..grid.len())
        .map(|g| {
            snaps
                .iter()
                .enumerate()
                .map(|(i, zs)| zs.iter().map(|z| grid.atom(i, g).dotc(z).norm_sqr()).sum::<f64>())
                .product()
        })
        .collect();
    Ok(SpectrumGrid { centers: grid.points.clone(), powers })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpStop {
    pub max_detections: usize,
    /// Minimum relative reduction of residual energy for a detection to be
    /// accepted.
    pub gain_threshold: f64,
}

impl Default for MpStop {
    fn default() -> Self {
        Self { max_detections: 10, gain_threshold: 0.05 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub position: [f64; 2],
    pub score: f64,
    pub cell: usize,
}

/// Result of [`matching_pursuit`], including the residual energy before
/// any peeling and after each accepted detection.
#[derive(Clone, Debug)]
pub struct MpOutput {
    pub detections: Vec<Detection>,
    pub residual_energy: Vec<f64>,
}

/// Greedy residual peeling over the grid. Each iteration picks the grid
/// point with the largest normalized matched-filter power summed over all
/// dictionaries and snapshots and projects its atom out of every residual.
pub fn matching_pursuit(frame: &MeasurementFrame, grid: &DictionaryGrid, stop: MpStop) -> Result<MpOutput> {
    grid.check(frame)?;
    if !(stop.gain_threshold >= 0.0) {
        return Err(Error::Validation("gain threshold must be nonnegative".into()));
    }
    let mut res: Vec<Vec<CVector<f64>>> =
        (0..frame.n_dict()).map(|i| (0..frame.n_snapshots).map(|j| frame.snapshot(i, j)).collect()).collect();
    let energy = |res: &Vec<Vec<CVector<f64>>>| res.iter().flatten().map(|r| r.norm_squared()).sum::<f64>();
    let mut e = energy(&res);
    let mut out = MpOutput { detections: Vec::new(), residual_energy: vec![e] };
    while out.detections.len() < stop.max_detections && e > 0.0 {
        let mut best = (0usize, f64::NEG_INFINITY);
        for g in 0..grid.len() {
            let mut s = 0.0;
            for (i, rs) in res.iter().enumerate() {
                let a = grid.atom(i, g);
                let inv = 1.0 / a.norm_squared();
                for r in rs {
                    s += a.dotc(r).norm_sqr() * inv;
                }
            }
            if s > best.1 {
                best = (g, s);
            }
        }
        let (g, score) = best;
        // projecting out a unit atom removes exactly `score` energy
        if score / e < stop.gain_threshold {
            break;
        }
        for (i, rs) in res.iter_mut().enumerate() {
            let a = grid.atom(i, g);
            let inv = Complex::new(1.0 / a.norm_squared(), 0.0);
            for r in rs.iter_mut() {
                let coef = a.dotc(r) * inv;
                r.axpy(-coef, a, Complex::new(1.0, 0.0));
            }
        }
        e = energy(&res);
        out.residual_energy.push(e);
        out.detections.push(Detection { position: grid.points[g], score, cell: g });
    }
    Ok(out)
}
