use nalgebra::{Complex, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::sensor::RadarSensor;
use crate::error::{Error, Result};
use crate::models::{KinematicTransition, Region};
use crate::scalar::CVector;

/// How a scripted object's initial state is chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrackInit {
    Fixed { state: [f64; 4] },
    Random { pos_min: [f64; 2], pos_max: [f64; 2], vel_var: f64 },
}

/// One scripted object: present from `birth` until the step before
/// `disappear`, or until it leaves the surveillance region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackScript {
    pub birth: usize,
    pub disappear: usize,
    pub init: TrackInit,
}

/// Global measurement scaling applied after synthesis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    None,
    /// `1 / sqrt(P_max)` with `P_max` the largest radar-range power of any
    /// object at any step over all sensors. Without objects, the power at
    /// the surveillance-region centre is used instead.
    MaxObjectPower,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub sensors: Vec<RadarSensor<f64>>,
    pub n_snapshots: usize,
    pub n_steps: usize,
    pub noise_power: Vec<f64>,
    pub region: Region,
    pub driving_noise_var: f64,
    pub tracks: Vec<TrackScript>,
    pub normalization: Normalization,
    pub rng_seed: u64,
}

impl ScenarioConfig {
    /// The two-radar scene: sensors at `[0, 0]` and `[50, 50]`, `J = 3`,
    /// `K = 80`, five scripted objects, the two first ones crossing at the
    /// region centre at `k = 40`.
    pub fn paper(noise_power: f64, n_delay: usize, n_elements: usize, seed: u64) -> Self {
        let random = TrackInit::Random { pos_min: [15.0, 15.0], pos_max: [35.0, 35.0], vel_var: 0.04 };
        let mut tracks = Self::crossing_scripts();
        for (birth, disappear) in [(15, 55), (20, 60), (25, 65)] {
            tracks.push(TrackScript { birth, disappear, init: random.clone() });
        }
        Self {
            sensors: vec![
                RadarSensor::automotive([0.0, 0.0], n_delay, n_elements),
                RadarSensor::automotive([50.0, 50.0], n_delay, n_elements),
            ],
            n_snapshots: 3,
            n_steps: 80,
            noise_power: vec![noise_power; 2],
            region: Region::new([0.0, 0.0], [50.0, 50.0]),
            driving_noise_var: 1e-4,
            tracks,
            normalization: Normalization::MaxObjectPower,
            rng_seed: seed,
        }
    }

    pub fn crossing_scripts() -> Vec<TrackScript> {
        vec![
            TrackScript { birth: 10, disappear: 70, init: TrackInit::Fixed { state: [10.0, 25.0, 0.5, 0.0] } },
            TrackScript { birth: 10, disappear: 70, init: TrackInit::Fixed { state: [25.0, 10.0, 0.0, 0.5] } },
        ]
    }

    pub fn n_dict(&self) -> usize {
        self.sensors.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.sensors.iter().map(|s| s.dim()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sensors.is_empty() {
            return Err(Error::Validation("scenario needs at least one sensor".into()));
        }
        for s in &self.sensors {
            s.validate()?;
        }
        if self.n_snapshots == 0 || self.n_steps == 0 {
            return Err(Error::Validation("scenario needs J >= 1 and K >= 1".into()));
        }
        if self.noise_power.len() != self.sensors.len() {
            return Err(Error::Dimension {
                what: "noise power per dictionary",
                expected: self.sensors.len(),
                found: self.noise_power.len(),
            });
        }
        if self.noise_power.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
            return Err(Error::Validation("noise power must be positive".into()));
        }
        if !(self.region.area() > 0.0) {
            return Err(Error::Validation("surveillance region is empty".into()));
        }
        if !(self.driving_noise_var >= 0.0) {
            return Err(Error::Validation("driving noise variance must be nonnegative".into()));
        }
        for t in &self.tracks {
            if t.birth == 0 || t.disappear <= t.birth {
                return Err(Error::Validation(format!(
                    "track script needs 1 <= birth < disappear, got {} and {}",
                    t.birth, t.disappear
                )));
            }
        }
        Ok(())
    }

    /// Received power of every sensor at the region centre.
    pub fn centre_power(&self) -> Result<Vec<f64>> {
        let c = [0.5 * (self.region.min[0] + self.region.max[0]), 0.5 * (self.region.min[1] + self.region.max[1])];
        self.sensors.iter().map(|s| s.amplitude_power(s.range(c))).collect()
    }

    /// Input SNR in dB per dictionary for an object at the region centre.
    pub fn centre_snr_db(&self) -> Result<Vec<f64>> {
        Ok(self.centre_power()?.iter().zip(&self.noise_power).map(|(p, e)| 10.0 * (p / e).log10()).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthTrack {
    pub id: u64,
    pub birth_step: usize,
    pub death_step: usize,
    pub states: Vec<[f64; 4]>,
}

impl GroundTruthTrack {
    pub fn state_at(&self, k: usize) -> Option<[f64; 4]> {
        if k < self.birth_step || k > self.death_step {
            return None;
        }
        self.states.get(k - self.birth_step).copied()
    }
}

/// Positions of all objects alive at step `k`.
pub fn truth_positions(tracks: &[GroundTruthTrack], k: usize) -> Vec<[f64; 2]> {
    tracks.iter().filter_map(|t| t.state_at(k)).map(|s| [s[0], s[1]]).collect()
}

/// Complex sensor data of one step, stored as `complex64` in `(i, j, m)`
/// order.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementFrame {
    pub step: usize,
    pub dims: Vec<usize>,
    pub n_snapshots: usize,
    pub data: Vec<Complex<f32>>,
    pub normalization_scale: f64,
}

impl MeasurementFrame {
    pub fn zeros(step: usize, dims: Vec<usize>, n_snapshots: usize, scale: f64) -> Self {
        let len = dims.iter().sum::<usize>() * n_snapshots;
        Self { step, dims, n_snapshots, data: vec![Complex::new(0.0, 0.0); len], normalization_scale: scale }
    }

    pub fn n_dict(&self) -> usize {
        self.dims.len()
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        self.dims[..i].iter().sum::<usize>() * self.n_snapshots + j * self.dims[i]
    }

    pub fn snapshot_raw(&self, i: usize, j: usize) -> &[Complex<f32>] {
        let o = self.offset(i, j);
        &self.data[o..o + self.dims[i]]
    }

    pub fn snapshot_raw_mut(&mut self, i: usize, j: usize) -> &mut [Complex<f32>] {
        let o = self.offset(i, j);
        let m = self.dims[i];
        &mut self.data[o..o + m]
    }

    pub fn snapshot(&self, i: usize, j: usize) -> CVector<f64> {
        CVector::from_iterator(
            self.dims[i],
            self.snapshot_raw(i, j).iter().map(|c| Complex::new(c.re as f64, c.im as f64)),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// A simulated run: ground truth, frames for steps `1..=K`, and the noise
/// power per dictionary after normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub tracks: Vec<GroundTruthTrack>,
    pub frames: Vec<MeasurementFrame>,
    pub noise_power: Vec<f64>,
    pub scale: f64,
}

impl Dataset {
    /// Noise power per dictionary in the units of the stored frames.
    pub fn normalized_noise_power(&self) -> Vec<f64> {
        self.noise_power.iter().map(|e| e * self.scale * self.scale).collect()
    }
}

fn sample_cn<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex<f64> {
    let s = (0.5 * var).sqrt();
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    Complex::new(s * a, s * b)
}

fn script_trajectories<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<Vec<GroundTruthTrack>> {
    let cv = KinematicTransition::isotropic(cfg.driving_noise_var)?;
    let mut out = Vec::new();
    for (n, script) in cfg.tracks.iter().enumerate() {
        let x0 = match &script.init {
            TrackInit::Fixed { state } => Vector4::from(*state),
            TrackInit::Random { pos_min, pos_max, vel_var } => {
                let px = rng.gen_range(pos_min[0]..=pos_max[0]);
                let py = rng.gen_range(pos_min[1]..=pos_max[1]);
                let sd = vel_var.sqrt();
                let vx: f64 = rng.sample(StandardNormal);
                let vy: f64 = rng.sample(StandardNormal);
                Vector4::new(px, py, sd * vx, sd * vy)
            }
        };
        // trajectory is drawn in full so the random stream does not depend
        // on where the region exit happens
        let last = (script.disappear - 1).min(cfg.n_steps);
        let mut x = x0;
        let mut states = Vec::new();
        let mut alive = true;
        for k in script.birth..=script.disappear.max(script.birth) {
            if k > script.birth {
                x = cv.sample(&x, rng);
            }
            if k > last {
                continue;
            }
            if alive && cfg.region.contains([x[0], x[1]]) {
                states.push([x[0], x[1], x[2], x[3]]);
            } else {
                alive = false;
            }
        }
        if script.birth <= cfg.n_steps && !states.is_empty() {
            out.push(GroundTruthTrack {
                id: n as u64,
                birth_step: script.birth,
                death_step: script.birth + states.len() - 1,
                states,
            });
        }
    }
    Ok(out)
}

fn normalization_scale(cfg: &ScenarioConfig, tracks: &[GroundTruthTrack]) -> Result<f64> {
    if cfg.normalization == Normalization::None {
        return Ok(1.0);
    }
    let mut p_max = 0.0f64;
    for t in tracks {
        for s in &t.states {
            for sensor in &cfg.sensors {
                p_max = p_max.max(sensor.amplitude_power(sensor.range([s[0], s[1]]))?);
            }
        }
    }
    if p_max == 0.0 {
        p_max = cfg.centre_power()?.into_iter().fold(0.0, f64::max);
    }
    Ok(1.0 / p_max.sqrt())
}

/// Synthesizes ground truth and measurements. Deterministic in
/// `cfg.rng_seed`.
pub fn simulate(cfg: &ScenarioConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let tracks = script_trajectories(cfg, &mut rng)?;
    let scale = normalization_scale(cfg, &tracks)?;
    let dims = cfg.dims();
    let mut frames = Vec::with_capacity(cfg.n_steps);
    for k in 1..=cfg.n_steps {
        let mut frame = MeasurementFrame::zeros(k, dims.clone(), cfg.n_snapshots, scale);
        let alive: Vec<[f64; 2]> = truth_positions(&tracks, k);
        for (i, sensor) in cfg.sensors.iter().enumerate() {
            let atoms = alive
                .iter()
                .map(|&p| Ok((sensor.dictionary_eval(p)?, sensor.amplitude_power(sensor.range(p))?)))
                .collect::<Result<Vec<_>>>()?;
            for j in 0..cfg.n_snapshots {
                let mut z = CVector::<f64>::zeros(dims[i]);
                for (a, power) in &atoms {
                    let rho = sample_cn(&mut rng, *power);
                    z.axpy(rho, a, Complex::new(1.0, 0.0));
                }
                for zm in z.iter_mut() {
                    *zm += sample_cn(&mut rng, cfg.noise_power[i]);
                }
                for (dst, src) in frame.snapshot_raw_mut(i, j).iter_mut().zip(z.iter()) {
                    *dst = Complex::new((src.re * scale) as f32, (src.im * scale) as f32);
                }
            }
        }
        frames.push(frame);
    }
    Ok(Dataset { tracks, frames, noise_power: cfg.noise_power.clone(), scale })
}
