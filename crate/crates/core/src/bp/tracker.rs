use std::time::Instant;

use nalgebra::Vector4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{InitPolicy, TrackerConfig};
use super::messages::{
    eta_hats, gamma_hats, kappa_messages, kappa_total, lambda_messages, nu_messages, sigma_factors, signal_covariances,
    PowerSummary, StepContext,
};
use super::state::{softmax_or, systematic_indices, NoiseBelief, PotentialObject};
use crate::detector::{matching_pursuit, DictionaryGrid};
use crate::error::{Error, Result};
use crate::models::{BirthModel, KinematicTransition};
use crate::radar::{MeasurementFrame, RadarSensor};

impl PotentialObject {
    /// Builds a PO from predicted particles, computing the atom phasors and
    /// flat initial messages.
    pub fn new(
        id: u64,
        birth_step: usize,
        kin: Vec<Vector4<f64>>,
        power: Vec<Vec<f64>>,
        pred_existence: f64,
        sensors: &[RadarSensor<f64>],
        n_snapshots: usize,
    ) -> Result<Self> {
        if kin.is_empty() || power.len() != sensors.len() || power.iter().any(|p| p.is_empty()) {
            return Err(Error::Validation("potential object needs particles for every dictionary".into()));
        }
        if !(0.0..=1.0).contains(&pred_existence) {
            return Err(Error::Validation(format!("existence {pred_existence} outside [0, 1]")));
        }
        let mut po = Self {
            id,
            birth_step,
            kin,
            power,
            existence: pred_existence,
            pred_existence,
            phasors: Vec::new(),
            kappa: Vec::new(),
            lambda1: Vec::new(),
            lambda0: Vec::new(),
        };
        po.refresh_phasors(sensors)?;
        po.reset_messages(n_snapshots);
        Ok(po)
    }

    pub(crate) fn refresh_phasors(&mut self, sensors: &[RadarSensor<f64>]) -> Result<()> {
        self.phasors = sensors
            .iter()
            .map(|s| self.kin.iter().map(|x| s.phasors([x[0], x[1]])).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(())
    }
}

impl NoiseBelief {
    pub fn new(particles: Vec<Vec<f64>>, n_snapshots: usize) -> Result<Self> {
        if particles.iter().any(|p| p.is_empty() || p.iter().any(|&e| !(e > 0.0))) {
            return Err(Error::Validation("noise particles must be positive and nonempty".into()));
        }
        let mut nb = Self { particles, nu: Vec::new() };
        nb.reset_messages(n_snapshots);
        Ok(nb)
    }
}

/// Runs `iterations` message sweeps in the order power, noise, kinematic.
/// Messages are reset to flat first, so the incoming messages of the first
/// sweep are the predictions.
pub fn run_bp(ctx: &StepContext, pos: &mut [PotentialObject], nb: &mut NoiseBelief, iterations: usize) -> Result<()> {
    let j = ctx.n_snapshots();
    for po in pos.iter_mut() {
        po.reset_messages(j);
    }
    nb.reset_messages(j);
    for t in 0..iterations {
        let at = |e: Error| e.with_context(format!("iteration {t}"));
        let factors = sigma_factors(ctx, pos)?;
        let gamma = gamma_hats(pos)?;
        let eta = eta_hats(ctx, nb)?;
        let lambda = lambda_messages(ctx, pos, &factors, &gamma, &eta).map_err(at)?;
        for (po, (l1, l0)) in pos.iter_mut().zip(lambda) {
            po.lambda1 = l1;
            po.lambda0 = l0;
        }
        let gamma = gamma_hats(pos)?;
        let s = signal_covariances(ctx, &factors, &gamma);
        nb.nu = nu_messages(ctx, nb, &s).map_err(at)?;
        let eta = eta_hats(ctx, nb)?;
        let kappa = kappa_messages(ctx, pos, &factors, &gamma, &s, &eta).map_err(at)?;
        for (po, k) in pos.iter_mut().zip(kappa) {
            po.kappa = k;
        }
    }
    Ok(())
}

/// Normalized beliefs of one PO.
#[derive(Clone, Debug)]
pub struct PoBelief {
    pub kin_weights: Vec<f64>,
    /// `power_weights[i][p]`, conditional on `r = 1`.
    pub power_weights: Vec<Vec<f64>>,
    pub existence: f64,
}

/// Beliefs: prediction times all outgoing messages.
pub fn compute_beliefs(pos: &[PotentialObject]) -> Result<Vec<PoBelief>> {
    pos.iter()
        .map(|po| {
            let kin_weights = softmax_or(&kappa_total(po), po.id, 0, 0, "kinematic belief has no mass")?;
            let summary = PowerSummary::new(po);
            let power_weights = (0..po.n_dict())
                .map(|i| {
                    let mut s = vec![0.0; po.power[i].len()];
                    for l in &po.lambda1[i] {
                        for (a, b) in s.iter_mut().zip(l) {
                            *a += b;
                        }
                    }
                    softmax_or(&s, po.id, i, 0, "power belief has no mass")
                })
                .collect::<Result<Vec<_>>>()?;
            let (m1, m0) = summary.belief_log_masses(po);
            let existence = if m1 == f64::NEG_INFINITY {
                0.0
            } else if m0 == f64::NEG_INFINITY {
                1.0
            } else {
                1.0 / (1.0 + (m0 - m1).exp())
            };
            if !existence.is_finite() {
                return Err(Error::DegenerateMessage { po: po.id, dict: 0, snapshot: 0, what: "existence belief" });
            }
            Ok(PoBelief { kin_weights, power_weights, existence })
        })
        .collect()
}

/// Normalized noise belief weights `[i][q]`.
pub fn noise_belief(nb: &NoiseBelief) -> Result<Vec<Vec<f64>>> {
    (0..nb.particles.len())
        .map(|i| {
            let mut s = vec![0.0; nb.particles[i].len()];
            for v in &nb.nu[i] {
                for (a, b) in s.iter_mut().zip(v) {
                    *a += b;
                }
            }
            softmax_or(&s, u64::MAX, i, 0, "noise belief has no mass")
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeclaredTrack {
    pub id: u64,
    pub existence: f64,
    pub state: [f64; 4],
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub iterations: usize,
    pub n_pos: usize,
    pub n_new: usize,
    pub n_pruned: usize,
    /// Effective sample size of each PO's kinematic belief before
    /// resampling.
    pub kin_ess: Vec<f64>,
    /// Effective sample size of each dictionary's noise belief.
    pub noise_ess: Vec<f64>,
    pub elapsed_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackerOutput {
    pub step: usize,
    pub tracks: Vec<DeclaredTrack>,
    /// Posterior mean noise power per dictionary, in the units of the frame.
    pub eta_hat: Vec<f64>,
    pub diagnostics: StepDiagnostics,
}

fn ess(w: &[f64]) -> f64 {
    1.0 / w.iter().map(|x| x * x).sum::<f64>()
}

pub struct Tracker {
    cfg: TrackerConfig,
    sensors: Vec<RadarSensor<f64>>,
    n_snapshots: usize,
    birth: BirthModel,
    gate_grid: Option<DictionaryGrid>,
    kinematics: KinematicTransition,
    pos: Vec<PotentialObject>,
    noise: NoiseBelief,
    rng: ChaCha8Rng,
    next_id: u64,
    steps_done: usize,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig, sensors: Vec<RadarSensor<f64>>, n_snapshots: usize) -> Result<Self> {
        cfg.validate()?;
        if sensors.is_empty() || n_snapshots == 0 {
            return Err(Error::Validation("tracker needs at least one dictionary and snapshot".into()));
        }
        for s in &sensors {
            s.validate()?;
        }
        let birth = BirthModel::build(cfg.roi, cfg.cell_size, cfg.mean_births, cfg.birth_velocity_var, cfg.power_max)?;
        let gate_grid = match cfg.init_policy {
            InitPolicy::DetectorGated => Some(DictionaryGrid::new(&sensors, birth.centers())?),
            _ => None,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        let particles = (0..sensors.len())
            .map(|_| (0..cfg.n_noise).map(|_| cfg.noise_prior_max * (1.0 - rng.gen::<f64>())).collect())
            .collect();
        let noise = NoiseBelief::new(particles, n_snapshots)?;
        Ok(Self {
            kinematics: KinematicTransition::isotropic(cfg.driving_noise_var)?,
            cfg,
            sensors,
            n_snapshots,
            birth,
            gate_grid,
            pos: Vec::new(),
            noise,
            rng,
            next_id: 0,
            steps_done: 0,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    pub fn potential_objects(&self) -> &[PotentialObject] {
        &self.pos
    }

    pub fn noise_belief(&self) -> &NoiseBelief {
        &self.noise
    }

    pub fn birth_model(&self) -> &BirthModel {
        &self.birth
    }

    /// Adds a PO with the given posterior particles and existence; it is
    /// predicted like any other PO at the next step. Returns its id.
    pub fn insert_po(&mut self, kin: Vec<Vector4<f64>>, power: Vec<Vec<f64>>, existence: f64) -> Result<u64> {
        let id = self.next_id;
        let po = PotentialObject::new(id, self.steps_done, kin, power, existence, &self.sensors, self.n_snapshots)?;
        self.next_id += 1;
        self.pos.push(po);
        Ok(id)
    }

    pub fn run(&mut self, frames: &[MeasurementFrame]) -> Result<Vec<TrackerOutput>> {
        frames.iter().map(|f| self.step(f)).collect()
    }

    fn predict(&mut self) -> Result<()> {
        let (cfg, rng) = (&self.cfg, &mut self.rng);
        for po in &mut self.pos {
            for x in &mut po.kin {
                *x = self.kinematics.sample(x, rng);
            }
            for p in po.power.iter_mut().flatten() {
                *p = cfg.power_transition.sample(*p, rng);
            }
            po.pred_existence = cfg.p_s * po.existence;
            po.existence = po.pred_existence;
        }
        for e in self.noise.particles.iter_mut().flatten() {
            *e = cfg.noise_transition.sample(*e, rng);
        }
        Ok(())
    }

    fn birth_cells(&self, frame: &MeasurementFrame) -> Result<Vec<usize>> {
        Ok(match self.cfg.init_policy {
            InitPolicy::None => Vec::new(),
            InitPolicy::Grid => (0..self.birth.n_cells_total()).collect(),
            InitPolicy::DetectorGated => {
                let grid = self.gate_grid.as_ref().expect("gated policy builds its grid");
                let mut cells: Vec<usize> =
                    matching_pursuit(frame, grid, self.cfg.mp)?.detections.iter().map(|d| d.cell).collect();
                cells.sort_unstable();
                cells.dedup();
                cells
            }
        })
    }

    fn spawn(&mut self, frame: &MeasurementFrame) -> Result<usize> {
        let cells = self.birth_cells(frame)?;
        for &q in &cells {
            let b = self.birth.sample(q, self.cfg.n_kin, self.cfg.n_power, self.sensors.len(), &mut self.rng)?;
            let id = self.next_id;
            self.next_id += 1;
            let po =
                PotentialObject::new(id, frame.step, b.kin, b.power, b.existence, &self.sensors, self.n_snapshots)?;
            self.pos.push(po);
        }
        Ok(cells.len())
    }

    fn check_frame(&self, frame: &MeasurementFrame) -> Result<()> {
        if frame.n_snapshots != self.n_snapshots {
            return Err(Error::Dimension {
                what: "frame snapshots",
                expected: self.n_snapshots,
                found: frame.n_snapshots,
            });
        }
        Ok(())
    }

    /// Processes one frame: prediction, new POs, message passing, beliefs,
    /// estimation, resampling and pruning.
    pub fn step(&mut self, frame: &MeasurementFrame) -> Result<TrackerOutput> {
        let start = Instant::now();
        self.check_frame(frame)?;
        let ctx = StepContext::new(
            &self.sensors,
            frame,
            self.cfg.b_eta,
            self.cfg.sigma_rank_cap,
            self.cfg.sigma_compress_tol,
            self.cfg.eta_floor_rel,
        )?;
        if self.steps_done > 0 {
            self.predict()?;
        }
        for po in &mut self.pos {
            po.refresh_phasors(&self.sensors)?;
        }
        let n_new = self.spawn(frame)?;
        run_bp(&ctx, &mut self.pos, &mut self.noise, self.cfg.iterations)?;

        let beliefs = compute_beliefs(&self.pos)?;
        let noise_w = noise_belief(&self.noise)?;
        let mut diag = StepDiagnostics {
            iterations: self.cfg.iterations,
            n_new,
            noise_ess: noise_w.iter().map(|w| ess(w)).collect(),
            ..Default::default()
        };
        let eta_hat =
            noise_w.iter().zip(&self.noise.particles).map(|(w, p)| w.iter().zip(p).map(|(w, e)| w * e).sum()).collect();

        let mut tracks = Vec::new();
        for (po, b) in self.pos.iter_mut().zip(&beliefs) {
            po.existence = b.existence;
            diag.kin_ess.push(ess(&b.kin_weights));
            if b.existence > self.cfg.t_dec {
                tracks.push(DeclaredTrack { id: po.id, existence: b.existence, state: po.mean_state(&b.kin_weights) });
            }
        }

        for (po, b) in self.pos.iter_mut().zip(&beliefs) {
            let idx = systematic_indices(&b.kin_weights, self.cfg.n_kin, self.rng.gen());
            po.kin = idx.iter().map(|&k| po.kin[k]).collect();
            for (p, w) in po.power.iter_mut().zip(&b.power_weights) {
                let idx = systematic_indices(w, self.cfg.n_power, self.rng.gen());
                *p = idx.iter().map(|&k| p[k]).collect();
            }
        }
        for (p, w) in self.noise.particles.iter_mut().zip(&noise_w) {
            let idx = systematic_indices(w, self.cfg.n_noise, self.rng.gen());
            *p = idx.iter().map(|&k| p[k]).collect();
        }

        let before = self.pos.len();
        let t_pru = self.cfg.t_pru;
        self.pos.retain(|po| po.existence >= t_pru);
        diag.n_pruned = before - self.pos.len();
        diag.n_pos = self.pos.len();
        diag.elapsed_s = start.elapsed().as_secs_f64();
        self.steps_done += 1;
        Ok(TrackerOutput { step: frame.step, tracks, eta_hat, diagnostics: diag })
    }
}
