use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use super::Detection;
use crate::error::Result;
use crate::metrics::solve_assignment;
use crate::models::KinematicTransition;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    /// Per-axis acceleration variance of the Kalman filter.
    pub process_var: f64,
    /// Per-axis position measurement variance, m^2.
    pub meas_var: f64,
    pub init_vel_var: f64,
    /// Chi-square gate on the innovation (2 degrees of freedom).
    pub gate: f64,
    pub confirm_m: usize,
    pub confirm_n: usize,
    /// Consecutive misses after which a track is deleted.
    pub max_misses: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            process_var: 1e-2,
            meas_var: 1.0,
            init_vel_var: 0.25,
            gate: 13.8,
            confirm_m: 3,
            confirm_n: 5,
            max_misses: 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrackStatus {
    Tentative,
    Confirmed,
}

#[derive(Clone, Debug)]
pub struct BaselineTrack {
    pub id: u64,
    pub x: Vector4<f64>,
    pub p: Matrix4<f64>,
    pub status: TrackStatus,
    hits: Vec<bool>,
    misses: usize,
}

impl BaselineTrack {
    pub fn position(&self) -> [f64; 2] {
        [self.x[0], self.x[1]]
    }
}

/// Global-nearest-neighbour tracker with one Kalman filter per track,
/// M-of-N confirmation and deletion after consecutive misses.
#[derive(Clone, Debug)]
pub struct BaselineTracker {
    cfg: BaselineConfig,
    cv: KinematicTransition,
    h: Matrix2x4<f64>,
    r: Matrix2<f64>,
    tracks: Vec<BaselineTrack>,
    next_id: u64,
}

const NO_ASSIGN: f64 = 1e12;

impl BaselineTracker {
    pub fn new(cfg: BaselineConfig) -> Result<Self> {
        let cv = KinematicTransition::isotropic(cfg.process_var)?;
        #[rustfmt::skip]
        let h = Matrix2x4::new(
            1.0, 0.0, 0.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
        );
        Ok(Self { cfg, cv, h, r: Matrix2::identity() * cfg.meas_var, tracks: Vec::new(), next_id: 0 })
    }

    pub fn tracks(&self) -> &[BaselineTrack] {
        &self.tracks
    }

    pub fn confirmed(&self) -> impl Iterator<Item = &BaselineTrack> {
        self.tracks.iter().filter(|t| t.status == TrackStatus::Confirmed)
    }

    /// Processes one step of detections and returns the confirmed tracks.
    pub fn step(&mut self, detections: &[Detection]) -> Vec<BaselineTrack> {
        let q = self.cv.process_cov();
        for t in &mut self.tracks {
            t.x = self.cv.f * t.x;
            t.p = self.cv.f * t.p * self.cv.f.transpose() + q;
        }
        // gated Mahalanobis costs, tracks x detections
        let costs: Vec<Vec<f64>> = self
            .tracks
            .iter()
            .map(|t| {
                let s = self.h * t.p * self.h.transpose() + self.r;
                let s_inv = s.try_inverse().unwrap_or_else(Matrix2::zeros);
                detections
                    .iter()
                    .map(|d| {
                        let nu = Vector2::new(d.position[0], d.position[1]) - self.h * t.x;
                        let d2 = (nu.transpose() * s_inv * nu)[0];
                        if d2 <= self.cfg.gate {
                            d2
                        } else {
                            NO_ASSIGN
                        }
                    })
                    .collect()
            })
            .collect();
        let mut det_of_track = vec![None; self.tracks.len()];
        if !self.tracks.is_empty() && !detections.is_empty() {
            if self.tracks.len() <= detections.len() {
                for (ti, dj) in solve_assignment(&costs).into_iter().enumerate() {
                    det_of_track[ti] = Some(dj);
                }
            } else {
                let t: Vec<Vec<f64>> =
                    (0..detections.len()).map(|j| costs.iter().map(|row| row[j]).collect()).collect();
                for (dj, ti) in solve_assignment(&t).into_iter().enumerate() {
                    det_of_track[ti] = Some(dj);
                }
            }
        }
        let mut used = vec![false; detections.len()];
        for (ti, t) in self.tracks.iter_mut().enumerate() {
            let hit = match det_of_track[ti] {
                Some(dj) if costs[ti][dj] < NO_ASSIGN => {
                    used[dj] = true;
                    let z = Vector2::new(detections[dj].position[0], detections[dj].position[1]);
                    let s = self.h * t.p * self.h.transpose() + self.r;
                    let k = t.p * self.h.transpose() * s.try_inverse().unwrap_or_else(Matrix2::zeros);
                    t.x += k * (z - self.h * t.x);
                    t.p = (Matrix4::identity() - k * self.h) * t.p;
                    true
                }
                _ => false,
            };
            t.hits.push(hit);
            if t.hits.len() > self.cfg.confirm_n {
                t.hits.remove(0);
            }
            t.misses = if hit { 0 } else { t.misses + 1 };
            if t.status == TrackStatus::Tentative && t.hits.iter().filter(|&&h| h).count() >= self.cfg.confirm_m {
                t.status = TrackStatus::Confirmed;
            }
        }
        let cfg = self.cfg;
        self.tracks.retain(|t| match t.status {
            TrackStatus::Confirmed => t.misses < cfg.max_misses,
            // a tentative track that can no longer reach M hits within N
            TrackStatus::Tentative => {
                let hits = t.hits.iter().filter(|&&h| h).count();
                let remaining = cfg.confirm_n.saturating_sub(t.hits.len());
                hits + remaining >= cfg.confirm_m && t.misses < cfg.max_misses
            }
        });
        for (dj, d) in detections.iter().enumerate() {
            if used[dj] {
                continue;
            }
            let mut p = Matrix4::zeros();
            p[(0, 0)] = self.cfg.meas_var;
            p[(1, 1)] = self.cfg.meas_var;
            p[(2, 2)] = self.cfg.init_vel_var;
            p[(3, 3)] = self.cfg.init_vel_var;
            let status = if self.cfg.confirm_m <= 1 { TrackStatus::Confirmed } else { TrackStatus::Tentative };
            self.tracks.push(BaselineTrack {
                id: self.next_id,
                x: Vector4::new(d.position[0], d.position[1], 0.0, 0.0),
                p,
                status,
                hits: vec![true],
                misses: 0,
            });
            self.next_id += 1;
        }
        self.confirmed().cloned().collect()
    }
}
