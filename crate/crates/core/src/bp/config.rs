use serde::{Deserialize, Serialize};

use crate::detector::MpStop;
use crate::error::{Error, Result};
use crate::models::{GammaForm, GammaTransition, Region};

/// Where new potential objects are introduced each step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitPolicy {
    /// One new PO per birth cell.
    Grid,
    /// One new PO per cell holding a matching-pursuit detection.
    DetectorGated,
    /// No births; POs only enter through [`super::Tracker::insert_po`].
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    pub n_kin: usize,
    pub n_power: usize,
    pub n_noise: usize,
    pub iterations: usize,
    pub t_dec: f64,
    pub t_pru: f64,
    pub b_eta: f64,
    pub sigma_rank_cap: usize,
    /// Relative trace tolerance of the compressed `Sigma` factor.
    pub sigma_compress_tol: f64,
    pub init_policy: InitPolicy,
    pub rng_seed: u64,
    pub p_s: f64,
    pub power_transition: GammaTransition,
    pub noise_transition: GammaTransition,
    pub driving_noise_var: f64,
    pub roi: Region,
    pub cell_size: [f64; 2],
    pub mean_births: f64,
    pub birth_velocity_var: f64,
    pub power_max: f64,
    /// Initial noise powers are uniform on `(0, noise_prior_max]`, in
    /// normalized units.
    pub noise_prior_max: f64,
    /// Floor on the expected noise power relative to the mean measurement
    /// power of the snapshot.
    pub eta_floor_rel: f64,
    pub mp: MpStop,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            n_kin: 3000,
            n_power: 500,
            n_noise: 200,
            iterations: 3,
            t_dec: 0.5,
            t_pru: 1e-2,
            b_eta: 1.0,
            sigma_rank_cap: 64,
            sigma_compress_tol: 1e-10,
            init_policy: InitPolicy::DetectorGated,
            rng_seed: 0,
            p_s: 0.9,
            power_transition: GammaTransition { concentration: 1e3, form: GammaForm::MeanConcentration },
            noise_transition: GammaTransition { concentration: 100.0, form: GammaForm::MeanConcentration },
            driving_noise_var: 1e-4,
            roi: Region::new([0.0, 0.0], [50.0, 50.0]),
            cell_size: [1.0, 1.0],
            mean_births: 1e-6,
            birth_velocity_var: 0.25,
            power_max: 1.0,
            noise_prior_max: 4.0,
            eta_floor_rel: 1e-6,
            mp: MpStop::default(),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_kin == 0 || self.n_power == 0 || self.n_noise == 0 || self.iterations == 0 || self.sigma_rank_cap == 0
        {
            return Err(Error::Validation("particle counts, iterations and rank cap must be >= 1".into()));
        }
        if !(0.0 <= self.t_pru && self.t_pru < self.t_dec && self.t_dec < 1.0) {
            return Err(Error::Validation(format!(
                "thresholds need 0 <= T_pru < T_dec < 1, got {} and {}",
                self.t_pru, self.t_dec
            )));
        }
        if !(self.b_eta >= 1.0) {
            return Err(Error::Validation("noise amplification must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.p_s) {
            return Err(Error::Validation("survival probability outside [0, 1]".into()));
        }
        if !(self.noise_prior_max > 0.0) || !(self.power_max > 0.0) {
            return Err(Error::Validation("prior upper bounds must be positive".into()));
        }
        if !(self.sigma_compress_tol >= 0.0) || !(self.eta_floor_rel >= 0.0) {
            return Err(Error::Validation("tolerances must be nonnegative".into()));
        }
        GammaTransition::new(self.power_transition.concentration, self.power_transition.form)?;
        GammaTransition::new(self.noise_transition.concentration, self.noise_transition.form)?;
        Ok(())
    }
}
