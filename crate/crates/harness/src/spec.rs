use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tbd_core::bp::TrackerConfig;
use tbd_core::detector::{BaselineConfig, MpStop};
use tbd_core::metrics::GospaParams;
use tbd_core::radar::ScenarioConfig;

use crate::error::{HarnessError, Result};

/// Noise power of the mid (-3 dB at the region centre) level.
pub const MID_NOISE: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Paper,
    Desk,
}

/// Everything one experiment needs. Runs use scenario seed `seed_base + r`
/// and a tracker seed derived from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub preset: Option<Preset>,
    pub n_runs: usize,
    pub seed_base: u64,
    pub out_dir: PathBuf,
    /// Evaluation window, first and last step inclusive.
    pub window: [usize; 2],
    pub gospa: GospaParams<f64>,
    pub scenario: ScenarioConfig,
    pub tracker: TrackerConfig,
    pub baseline: BaselineConfig,
    pub baseline_detector: MpStop,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self::preset(Preset::Desk)
    }
}

impl ExperimentSpec {
    pub fn preset(p: Preset) -> Self {
        let (md, mt, n_runs, tracker) = match p {
            Preset::Desk => (10, 8, 10, TrackerConfig::default()),
            Preset::Paper => {
                (20, 10, 100, TrackerConfig { n_kin: 30_000, n_power: 1000, n_noise: 500, ..TrackerConfig::default() })
            }
        };
        Self {
            preset: Some(p),
            n_runs,
            seed_base: 1,
            out_dir: PathBuf::from("out"),
            window: [20, 60],
            gospa: GospaParams::default(),
            scenario: ScenarioConfig::paper(MID_NOISE, md, mt, 1),
            tracker,
            baseline: BaselineConfig::default(),
            baseline_detector: MpStop::default(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::load_over(path, &Self::default())
    }

    /// Reads a TOML spec whose tables override `base` key by key, so a file
    /// may change a single tracker setting of a preset.
    pub fn load_over(path: &Path, base: &Self) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let at = |e: String| HarnessError::Config(format!("{}: {e}", path.display()));
        let overlay: toml::Value = toml::from_str(&text).map_err(|e| at(e.to_string()))?;
        let mut merged = toml::Value::try_from(base).map_err(|e| at(e.to_string()))?;
        merge(&mut merged, overlay);
        merged.try_into().map_err(|e: toml::de::Error| at(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: tbd_core::Error| HarnessError::Config(e.to_string());
        if self.n_runs == 0 {
            return Err(HarnessError::Config("n_runs must be >= 1".into()));
        }
        let [a, b] = self.window;
        if a == 0 || a > b || b > self.scenario.n_steps {
            return Err(HarnessError::Config(format!("window [{a}, {b}] outside steps 1..={}", self.scenario.n_steps)));
        }
        self.scenario.validate().map_err(cfg)?;
        self.tracker.validate().map_err(cfg)?;
        GospaParams::new(self.gospa.cutoff, self.gospa.order, self.gospa.alpha).map_err(cfg)?;
        Ok(())
    }

    pub fn scenario_seed(&self, run: usize) -> u64 {
        self.seed_base.wrapping_add(run as u64)
    }

    /// Kept distinct from the scenario seed so the tracker never replays
    /// the simulator's random stream.
    pub fn tracker_seed(&self, run: usize) -> u64 {
        self.scenario_seed(run) ^ 0x7ac3_91d5_e2b4_f06a
    }

    pub fn scenario_for(&self, run: usize) -> ScenarioConfig {
        ScenarioConfig { rng_seed: self.scenario_seed(run), ..self.scenario.clone() }
    }

    pub fn tracker_for(&self, run: usize) -> TrackerConfig {
        TrackerConfig { rng_seed: self.tracker_seed(run), ..self.tracker.clone() }
    }

    /// Settings that supplement or depart from the published setup, for
    /// the run manifest.
    pub fn deviations(&self) -> Vec<String> {
        let t = &self.tracker;
        vec![
            format!("BP iterations per step T = {}", t.iterations),
            format!("Sigma-hat rank cap R_max = {}, compression tolerance {}", t.sigma_rank_cap, t.sigma_compress_tol),
            format!("power transition {:?} with c = {}", t.power_transition.form, t.power_transition.concentration),
            format!("noise transition {:?} with c = {}", t.noise_transition.form, t.noise_transition.concentration),
            format!("noise prior U(0, {}] in normalized units", t.noise_prior_max),
            format!("expected-noise floor {} x mean snapshot power", t.eta_floor_rel),
            format!("new-PO policy {:?}, matching pursuit stop {:?}", t.init_policy, t.mp),
            format!("particles P_x = {}, P_gamma = {}, P_eta = {}", t.n_kin, t.n_power, t.n_noise),
            format!("GOSPA alpha = {}", self.gospa.alpha),
            format!("baseline: matching pursuit {:?} + GNN Kalman {:?}", self.baseline_detector, self.baseline),
        ]
    }
}

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
