//! The experiment commands. Every command reads its inputs from and writes
//! its outputs under the spec's output directory, so they can be run
//! separately or chained by [`all`].

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tbd_core::bp::Tracker;
use tbd_core::detector::{matching_pursuit, BaselineTracker, DictionaryGrid};
use tbd_core::metrics::gospa;
use tbd_core::models::BirthModel;
use tbd_core::radar::{read_dataset, simulate as simulate_scenario, truth_positions, write_dataset, Dataset};

use crate::error::{HarnessError, Result};
use crate::records::*;
use crate::spec::ExperimentSpec;

pub const TBD: &str = "bp_tbd";
pub const BASELINE: &str = "mp_gnn";

/// File locations under the output directory.
#[derive(Clone, Debug)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn dataset(&self, run: usize) -> PathBuf {
        self.root.join("datasets").join(format!("run_{run:03}.tbdz"))
    }

    pub fn tracks(&self, method: &str, run: usize) -> PathBuf {
        self.root.join(method).join(format!("run_{run:03}_tracks.csv"))
    }

    pub fn noise(&self, run: usize) -> PathBuf {
        self.root.join(TBD).join(format!("run_{run:03}_noise.csv"))
    }

    pub fn diagnostics(&self, run: usize) -> PathBuf {
        self.root.join(TBD).join(format!("run_{run:03}_diagnostics.csv"))
    }

    pub fn detections(&self, run: usize) -> PathBuf {
        self.root.join(BASELINE).join(format!("run_{run:03}_detections.csv"))
    }

    pub fn eval(&self, name: &str) -> PathBuf {
        self.root.join("eval").join(name)
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }
}

fn ensure_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| HarnessError::io(p, e))
}

/// Worker count from `TBD_WORKERS`, defaulting to the available cores.
pub fn workers() -> usize {
    std::env::var("TBD_WORKERS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs `f` for every run index on the worker pool. Results come back in
/// run order and the first failing run (by index) is reported.
fn for_runs<T, F>(n_runs: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers())
        .build()
        .map_err(|e| HarnessError::Config(format!("worker pool: {e}")))?;
    pool.install(|| (0..n_runs).into_par_iter().map(&f).collect::<Vec<_>>()).into_iter().collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSeeds {
    pub run: usize,
    pub scenario_seed: u64,
    pub tracker_seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub software_version: String,
    pub spec: ExperimentSpec,
    pub seeds: Vec<RunSeeds>,
    pub deviations: Vec<String>,
    pub timings_s: BTreeMap<String, f64>,
}

/// Records the spec and the wall time of `command` in the manifest,
/// keeping timings of earlier commands run with the same spec.
fn record(spec: &ExperimentSpec, command: &str, started: Instant) -> Result<()> {
    let layout = Layout::new(&spec.out_dir);
    let path = layout.manifest();
    let mut timings = BTreeMap::new();
    if let Ok(text) = fs::read_to_string(&path) {
        if let Ok(old) = serde_json::from_str::<Manifest>(&text) {
            if &old.spec == spec {
                timings = old.timings_s;
            }
        }
    }
    timings.insert(command.to_string(), started.elapsed().as_secs_f64());
    let m = Manifest {
        software_version: env!("CARGO_PKG_VERSION").to_string(),
        spec: spec.clone(),
        seeds: (0..spec.n_runs)
            .map(|run| RunSeeds { run, scenario_seed: spec.scenario_seed(run), tracker_seed: spec.tracker_seed(run) })
            .collect(),
        deviations: spec.deviations(),
        timings_s: timings,
    };
    ensure_dir(&spec.out_dir)?;
    let text = serde_json::to_string_pretty(&m).map_err(|e| HarnessError::data(&path, e))?;
    fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))
}

fn load(run: usize, path: &Path) -> Result<Dataset> {
    if !path.exists() {
        return Err(HarnessError::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "dataset not found")));
    }
    read_dataset(path).map_err(|e| HarnessError::from_core(run, path, e))
}

fn check_shape(spec: &ExperimentSpec, ds: &Dataset, path: &Path) -> Result<()> {
    let dims = spec.scenario.dims();
    let frame_dims = ds.frames.first().map(|f| (f.dims.clone(), f.n_snapshots));
    if let Some((d, j)) = frame_dims {
        if d != dims || j != spec.scenario.n_snapshots {
            return Err(HarnessError::Config(format!(
                "{}: dataset shape {d:?} x {j} does not match configured {dims:?} x {}",
                path.display(),
                spec.scenario.n_snapshots
            )));
        }
    }
    Ok(())
}

/// Writes one dataset per run with seed `seed_base + run`.
pub fn simulate(spec: &ExperimentSpec) -> Result<()> {
    let started = Instant::now();
    spec.validate()?;
    let layout = Layout::new(&spec.out_dir);
    ensure_dir(&layout.root.join("datasets"))?;
    for_runs(spec.n_runs, |run| {
        let path = layout.dataset(run);
        let ds = simulate_scenario(&spec.scenario_for(run)).map_err(|e| HarnessError::from_core(run, &path, e))?;
        write_dataset(&path, &ds).map_err(|e| HarnessError::from_core(run, &path, e))
    })?;
    record(spec, "simulate", started)
}

/// Runs the BP-TBD tracker on every dataset.
pub fn track(spec: &ExperimentSpec) -> Result<()> {
    let started = Instant::now();
    spec.validate()?;
    let layout = Layout::new(&spec.out_dir);
    ensure_dir(&layout.root.join(TBD))?;
    for_runs(spec.n_runs, |run| track_run(spec, &layout, run))?;
    record(spec, "track", started)
}

fn track_run(spec: &ExperimentSpec, layout: &Layout, run: usize) -> Result<()> {
    let path = layout.dataset(run);
    let ds = load(run, &path)?;
    check_shape(spec, &ds, &path)?;
    let core = |e| HarnessError::from_core(run, &path, e);
    let mut tracker =
        Tracker::new(spec.tracker_for(run), spec.scenario.sensors.clone(), spec.scenario.n_snapshots).map_err(core)?;
    let s2 = ds.scale * ds.scale;
    let (mut tracks, mut noise, mut diag) = (Vec::new(), Vec::new(), Vec::new());
    for frame in &ds.frames {
        let out = tracker.step(frame).map_err(core)?;
        for t in &out.tracks {
            let [px, py, vx, vy] = t.state;
            tracks.push(TrackRow { step: out.step, track_id: t.id, existence: t.existence, px, py, vx, vy });
        }
        for (i, e) in out.eta_hat.iter().enumerate() {
            noise.push(NoiseRow { step: out.step, dict: i, eta_hat: e / s2, eta_true: ds.noise_power[i] });
        }
        let d = &out.diagnostics;
        diag.push(DiagRow {
            step: out.step,
            n_pos: d.n_pos,
            n_new: d.n_new,
            n_pruned: d.n_pruned,
            n_declared: out.tracks.len(),
            iterations: d.iterations,
            min_kin_ess: d.kin_ess.iter().cloned().fold(f64::NAN, f64::min),
        });
    }
    write_csv(&layout.tracks(TBD, run), &tracks)?;
    write_csv(&layout.noise(run), &noise)?;
    write_csv(&layout.diagnostics(run), &diag)
}

/// Runs matching pursuit followed by the GNN Kalman tracker on every
/// dataset. The detector grid is the tracker's birth-cell grid.
pub fn baseline(spec: &ExperimentSpec) -> Result<()> {
    let started = Instant::now();
    spec.validate()?;
    let layout = Layout::new(&spec.out_dir);
    ensure_dir(&layout.root.join(BASELINE))?;
    let t = &spec.tracker;
    let cells = BirthModel::build(t.roi, t.cell_size, t.mean_births, t.birth_velocity_var, t.power_max)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let grid = DictionaryGrid::new(&spec.scenario.sensors, cells.centers())
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    for_runs(spec.n_runs, |run| {
        let path = layout.dataset(run);
        let ds = load(run, &path)?;
        check_shape(spec, &ds, &path)?;
        let core = |e| HarnessError::from_core(run, &path, e);
        let mut gnn = BaselineTracker::new(spec.baseline).map_err(core)?;
        let (mut tracks, mut dets) = (Vec::new(), Vec::new());
        for frame in &ds.frames {
            let mp = matching_pursuit(frame, &grid, spec.baseline_detector).map_err(core)?;
            for d in &mp.detections {
                dets.push(DetectionRow {
                    step: frame.step,
                    x: d.position[0],
                    y: d.position[1],
                    score: d.score,
                    cell: d.cell,
                });
            }
            for t in gnn.step(&mp.detections) {
                tracks.push(TrackRow {
                    step: frame.step,
                    track_id: t.id,
                    existence: 1.0,
                    px: t.x[0],
                    py: t.x[1],
                    vx: t.x[2],
                    vy: t.x[3],
                });
            }
        }
        write_csv(&layout.tracks(BASELINE, run), &tracks)?;
        write_csv(&layout.detections(run), &dets)
    })?;
    record(spec, "baseline", started)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub summary: Vec<SummaryRow>,
    pub per_step: Vec<GospaLongRow>,
    pub per_run: Vec<GospaRunRow>,
}

impl Evaluation {
    pub fn window_mean(&self, method: &str) -> Option<f64> {
        self.summary.iter().find(|r| r.method == method).map(|r| r.window_mean_gospa)
    }

    /// Plain-text summary table.
    pub fn table(&self) -> String {
        let mut s = format!("{:<10} {:>6} {:>12} {:>18}\n", "method", "runs", "window", "mean GOSPA");
        for r in &self.summary {
            s += &format!(
                "{:<10} {:>6} {:>12} {:>18.6}\n",
                r.method,
                r.n_runs,
                format!("{}-{}", r.window_start, r.window_end),
                r.window_mean_gospa
            );
        }
        s
    }
}

/// Per-step GOSPA of every method whose outputs exist, averaged over runs.
pub fn evaluate(spec: &ExperimentSpec) -> Result<Evaluation> {
    let started = Instant::now();
    spec.validate()?;
    let layout = Layout::new(&spec.out_dir);
    let methods: Vec<&str> = [TBD, BASELINE].into_iter().filter(|m| layout.root.join(m).is_dir()).collect();
    if methods.is_empty() {
        return Err(HarnessError::data(&layout.root, "no tracker outputs to evaluate"));
    }
    for m in &methods {
        let found = (0..).take_while(|&r| layout.tracks(m, r).exists()).count();
        if found != spec.n_runs {
            return Err(HarnessError::Config(format!(
                "run-count mismatch for {m}: spec has {} runs, found {found} outputs",
                spec.n_runs
            )));
        }
    }
    let truths: Vec<Vec<Vec<[f64; 2]>>> = for_runs(spec.n_runs, |run| {
        let ds = load(run, &layout.dataset(run))?;
        Ok((1..=ds.frames.len()).map(|k| truth_positions(&ds.tracks, k)).collect())
    })?;
    let mut per_run = Vec::new();
    let mut per_step = Vec::new();
    let mut summary = Vec::new();
    let [w0, w1] = spec.window;
    for m in methods {
        let n_steps = truths[0].len();
        let mut sums = vec![0.0; n_steps];
        for (run, truth) in truths.iter().enumerate() {
            if truth.len() != n_steps {
                return Err(HarnessError::data(&layout.dataset(run), "runs have different step counts"));
            }
            let est = positions_by_step(&read_csv::<TrackRow>(&layout.tracks(m, run))?, n_steps);
            for (k, (t, e)) in truth.iter().zip(&est).enumerate() {
                let g = gospa(t, e, &spec.gospa);
                sums[k] += g.total;
                per_run.push(GospaRunRow {
                    method: m.to_string(),
                    run,
                    step: k + 1,
                    gospa: g.total,
                    localization: g.localization,
                    missed: g.missed,
                    false_est: g.false_est,
                });
            }
        }
        let n = spec.n_runs as f64;
        for (k, s) in sums.iter().enumerate() {
            per_step.push(GospaLongRow { method: m.to_string(), step: k + 1, mean_gospa: s / n });
        }
        let last = w1.min(n_steps);
        let window: f64 = sums[w0 - 1..last].iter().sum::<f64>() / (n * (last + 1 - w0) as f64);
        summary.push(SummaryRow {
            method: m.to_string(),
            n_runs: spec.n_runs,
            window_start: w0,
            window_end: last,
            window_mean_gospa: window,
        });
    }
    ensure_dir(&layout.root.join("eval"))?;
    write_csv(&layout.eval("gospa_runs.csv"), &per_run)?;
    write_csv(&layout.eval("gospa.csv"), &per_step)?;
    write_csv(&layout.eval("summary.csv"), &summary)?;
    record(spec, "evaluate", started)?;
    Ok(Evaluation { summary, per_step, per_run })
}

/// Per-dictionary mean estimated noise power and mean relative error
/// across runs, per step.
pub fn noise_report(spec: &ExperimentSpec) -> Result<Vec<NoiseReportRow>> {
    let started = Instant::now();
    spec.validate()?;
    let layout = Layout::new(&spec.out_dir);
    let runs: Vec<Vec<NoiseRow>> = (0..spec.n_runs).map(|r| read_csv(&layout.noise(r))).collect::<Result<_>>()?;
    let mut acc: BTreeMap<(usize, usize), (f64, f64, f64, usize)> = BTreeMap::new();
    for rows in &runs {
        for r in rows {
            let e = acc.entry((r.dict, r.step)).or_insert((r.eta_true, 0.0, 0.0, 0));
            e.1 += r.eta_hat;
            e.2 += (r.eta_hat - r.eta_true).abs() / r.eta_true;
            e.3 += 1;
        }
    }
    let report: Vec<NoiseReportRow> = acc
        .into_iter()
        .map(|((dict, step), (eta_true, sum, rel, n))| NoiseReportRow {
            dict,
            step,
            eta_true,
            mean_eta_hat: sum / n as f64,
            mean_rel_error: rel / n as f64,
        })
        .collect();
    ensure_dir(&layout.root.join("eval"))?;
    write_csv(&layout.eval("noise_report.csv"), &report)?;
    record(spec, "noise-report", started)?;
    Ok(report)
}

/// simulate, track, baseline, evaluate and noise-report in sequence.
pub fn all(spec: &ExperimentSpec) -> Result<Evaluation> {
    simulate(spec)?;
    track(spec)?;
    baseline(spec)?;
    let ev = evaluate(spec)?;
    noise_report(spec)?;
    Ok(ev)
}
