//! Acceptance criteria. Each test prints one `criterion N: PASS|FAIL` line
//! with the measured quantity and then asserts it.

use std::io::Write;
use std::path::Path;
use std::sync::{Mutex, MutexGuard};
use std::time::Instant;

use nalgebra::{Complex, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tbd_core::bp::{
    compute_moment_stats, InitPolicy, NoiseBelief, PotentialObject, StepContext, Tracker, TrackerConfig,
};
use tbd_core::gaussian::{logpdf_diag_shift, logpdf_lowrank_scaled, logpdf_rank1_update, StructuredCovariance};
use tbd_core::metrics::{gospa, GospaParams};
use tbd_core::radar::{read_dataset, simulate, MeasurementFrame, ScenarioConfig};
use tbd_core::{CMat, CVec, Sensor};
use tbd_harness::records::{positions_by_step, read_csv, TrackRow};
use tbd_harness::{ExperimentSpec, Layout, Preset, BASELINE, MID_NOISE, TBD};

// Criteria are timed and some run whole pipelines; run them one at a time.
static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(n: usize, what: &str, pass: bool, detail: String) {
    // Written to the raw handle so the line survives libtest output capture.
    let line = format!("criterion {n}: {} - {what}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {n} ({what}) failed: {detail}");
}

fn c(x: f64) -> Complex<f64> {
    Complex::new(x, 0.0)
}

fn random_cvec(r: &mut ChaCha8Rng, m: usize) -> CVec {
    CVec::from_fn(m, |_, _| Complex::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)))
}

fn random_cmat(r: &mut ChaCha8Rng, m: usize, k: usize) -> CMat {
    CMat::from_fn(m, k, |_, _| Complex::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)))
}

fn random_log(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(-4.0..0.0)).collect()
}

// ---------------------------------------------------------------------------
// 1. moment matching versus exhaustive mixture enumeration

struct Instance {
    sensors: Vec<Sensor>,
    pos: Vec<PotentialObject>,
    nb: NoiseBelief,
    ctx: StepContext,
}

fn random_instance(r: &mut ChaCha8Rng) -> Instance {
    let ni = r.gen_range(1..=2);
    let nj = r.gen_range(1..=2);
    let sensors: Vec<Sensor> = (0..ni)
        .map(|i| Sensor::automotive([50.0 * i as f64, 50.0 * i as f64], r.gen_range(1..=4), r.gen_range(1..=4)))
        .collect();
    let mut frame = MeasurementFrame::zeros(1, sensors.iter().map(|s| s.dim()).collect(), nj, 1.0);
    for i in 0..ni {
        for j in 0..nj {
            for v in frame.snapshot_raw_mut(i, j) {
                *v = Complex::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
            }
        }
    }
    let n_po = r.gen_range(1..=3);
    let pos = (0..n_po)
        .map(|n| {
            let px = r.gen_range(1..=5);
            let pg = r.gen_range(1..=5);
            let kin = (0..px).map(|_| Vector4::new(r.gen_range(5.0..45.0), r.gen_range(5.0..45.0), 0.0, 0.0)).collect();
            let power = (0..ni).map(|_| (0..pg).map(|_| r.gen_range(0.05..1.0)).collect()).collect();
            let mut po = PotentialObject::new(n as u64, 1, kin, power, r.gen_range(0.05..0.95), &sensors, nj).unwrap();
            po.kappa = (0..ni).map(|_| (0..nj).map(|_| random_log(r, px)).collect()).collect();
            po.lambda1 = (0..ni).map(|_| (0..nj).map(|_| random_log(r, pg)).collect()).collect();
            po.lambda0 = (0..ni).map(|_| (0..nj).map(|_| r.gen_range(-4.0..0.0)).collect()).collect();
            po
        })
        .collect();
    let pe = r.gen_range(1..=5);
    let mut nb =
        NoiseBelief::new((0..ni).map(|_| (0..pe).map(|_| r.gen_range(0.1..1.0)).collect()).collect(), nj).unwrap();
    nb.nu = (0..ni).map(|_| (0..nj).map(|_| random_log(r, pe)).collect()).collect();
    let ctx = StepContext::new(&sensors, &frame, 1.0, 64, 0.0, 0.0).unwrap();
    Instance { sensors, pos, nb, ctx }
}

/// One discrete outcome of a PO for snapshot `(i, j)`: probability, atom
/// and effective power `r * gamma`.
type Outcome = (f64, CVec, f64);

/// Incoming (all other snapshots) distribution of a PO at `(i, j)` as an
/// explicit list of joint kinematic/existence/power outcomes, computed in
/// the linear domain.
fn po_outcomes(inst: &Instance, n: usize, i: usize, j: usize) -> Vec<Outcome> {
    let po = &inst.pos[n];
    let (ni, nj) = (po.power.len(), po.kappa[0].len());
    let others = |f: &dyn Fn(usize, usize) -> f64| -> f64 {
        let mut prod = 1.0;
        for ii in 0..ni {
            for jj in 0..nj {
                if (ii, jj) != (i, j) {
                    prod *= f(ii, jj);
                }
            }
        }
        prod
    };
    let kin_w: Vec<f64> = (0..po.kin.len()).map(|p| others(&|ii, jj| po.kappa[ii][jj][p].exp())).collect();
    let kin_z: f64 = kin_w.iter().sum();
    let pg = po.power[i].len();
    let mut pow: Vec<(f64, f64)> = (0..pg)
        .map(|p| {
            let mut w = po.pred_existence / pg as f64;
            for jj in (0..nj).filter(|&jj| jj != j) {
                w *= po.lambda1[i][jj][p].exp();
            }
            for ii in (0..ni).filter(|&ii| ii != i) {
                let q = po.power[ii].len();
                w *= (0..q).map(|p| (0..nj).map(|jj| po.lambda1[ii][jj][p].exp()).product::<f64>()).sum::<f64>()
                    / q as f64;
            }
            (w, po.power[i][p])
        })
        .collect();
    pow.push(((1.0 - po.pred_existence) * others(&|ii, jj| po.lambda0[ii][jj].exp()), 0.0));
    let pow_z: f64 = pow.iter().map(|x| x.0).sum();
    let mut out = Vec::new();
    for (p, x) in po.kin.iter().enumerate() {
        let a = inst.sensors[i].dictionary_eval([x[0], x[1]]).unwrap();
        for &(w, g) in &pow {
            out.push((kin_w[p] / kin_z * w / pow_z, a.clone(), g));
        }
    }
    out
}

fn noise_outcomes(inst: &Instance, i: usize, j: usize) -> Vec<(f64, f64)> {
    let nu = &inst.nb.nu[i];
    let w: Vec<f64> = (0..inst.nb.particles[i].len())
        .map(|q| (0..nu.len()).filter(|&jj| jj != j).map(|jj| nu[jj][q].exp()).product())
        .collect();
    let z: f64 = w.iter().sum();
    w.iter().zip(&inst.nb.particles[i]).map(|(w, e)| (w / z, *e)).collect()
}

/// `E[z z^H]` by enumerating every joint outcome of all POs and the noise.
fn enumerate_second_moment(per_po: &[Vec<Outcome>], noise: &[(f64, f64)], m: usize) -> CMat {
    let mut acc = CMat::zeros(m, m);
    let mut idx = vec![0usize; per_po.len()];
    loop {
        let mut w = 1.0;
        let mut cov = CMat::zeros(m, m);
        for (n, k) in idx.iter().enumerate() {
            let (p, a, g) = &per_po[n][*k];
            w *= p;
            cov += (a * a.adjoint()) * c(*g);
        }
        for &(q, eta) in noise {
            let mut full = cov.clone();
            for d in 0..m {
                full[(d, d)] += c(eta);
            }
            acc += full * c(w * q);
        }
        let mut n = 0;
        loop {
            if n == idx.len() {
                return acc;
            }
            idx[n] += 1;
            if idx[n] < per_po[n].len() {
                break;
            }
            idx[n] = 0;
            n += 1;
        }
    }
}

fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    (a - b).iter().map(|x| x.norm()).fold(0.0, f64::max)
}

#[test]
fn criterion_1_moment_matching_matches_enumeration() {
    let _serial = serial();
    let start = Instant::now();
    let mut r = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    let n_inst = 120;
    for _ in 0..n_inst {
        let inst = random_instance(&mut r);
        let st = compute_moment_stats(&inst.ctx, &inst.pos, &inst.nb).unwrap();
        let n = r.gen_range(0..inst.pos.len());
        let i = r.gen_range(0..inst.sensors.len());
        let j = r.gen_range(0..inst.ctx.n_snapshots());
        let m = inst.sensors[i].dim();
        let all: Vec<Vec<Outcome>> = (0..inst.pos.len()).map(|k| po_outcomes(&inst, k, i, j)).collect();
        let noise = noise_outcomes(&inst, i, j);

        // power message: own PO at a fixed (gamma, r), kinematics from its incoming message
        let po = &inst.pos[n];
        let g = po.power[i][r.gen_range(0..po.power[i].len())];
        for exists in [true, false] {
            let mut per_po = all.clone();
            let g_eff = if exists { g } else { 0.0 };
            per_po[n] = po
                .kin
                .iter()
                .zip(all[n].chunks(po.power[i].len() + 1))
                .map(|(_, chunk)| (chunk.iter().map(|o| o.0).sum(), chunk[0].1.clone(), g_eff))
                .collect();
            let want = enumerate_second_moment(&per_po, &noise, m);
            worst = worst.max(max_abs_diff(&st.cov_lambda(n, i, j, g, exists), &want));
        }

        // kinematic message: own PO at a fixed state, power/existence from its incoming message
        let p = r.gen_range(0..po.kin.len());
        let a = inst.sensors[i].dictionary_eval([po.kin[p][0], po.kin[p][1]]).unwrap();
        let mut per_po = all.clone();
        let chunk = &all[n][p * (po.power[i].len() + 1)..(p + 1) * (po.power[i].len() + 1)];
        let mass: f64 = chunk.iter().map(|o| o.0).sum();
        per_po[n] = chunk.iter().map(|o| (o.0 / mass, a.clone(), o.2)).collect();
        let want = enumerate_second_moment(&per_po, &noise, m);
        worst = worst.max(max_abs_diff(&st.cov_kappa(n, i, j, &a), &want));

        // noise message at a fixed eta
        let eta = inst.nb.particles[i][r.gen_range(0..inst.nb.particles[i].len())];
        let want = enumerate_second_moment(&all, &[(1.0, eta)], m);
        worst = worst.max(max_abs_diff(&st.cov_nu(i, j, eta, m), &want));
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        "moment matching vs enumeration",
        worst <= 1e-10 && secs < 10.0,
        format!("{n_inst} instances, max elementwise error {worst:.2e} (tol 1e-10), {secs:.1} s (limit 10 s)"),
    );
}

// ---------------------------------------------------------------------------
// 2. structured evaluators versus dense evaluation

/// `log CN(z; 0, C)` from an LU factorization, independent of the
/// Cholesky and eigen paths under test.
fn lu_logpdf(z: &CVec, cov: &CMat) -> f64 {
    let m = z.len();
    let lu = cov.clone().lu();
    let u = lu.u();
    let logdet: f64 = (0..m).map(|k| u[(k, k)].norm().ln()).sum();
    let x = lu.solve(z).unwrap();
    -(m as f64) * std::f64::consts::PI.ln() - logdet - z.dotc(&x).re
}

fn random_psd(r: &mut ChaCha8Rng, m: usize) -> CMat {
    let k = r.gen_range(1..=m);
    let g = random_cmat(r, m, k);
    let mut s = &g * g.adjoint() * c(1.0 / k as f64);
    for d in 0..m {
        s[(d, d)] += c(r.gen_range(0.05..1.0));
    }
    (&s + s.adjoint()) * c(0.5)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

#[test]
fn criterion_2_structured_likelihoods_match_dense() {
    let _serial = serial();
    let start = Instant::now();
    let mut r = ChaCha8Rng::seed_from_u64(202);
    let (mut worst, mut count) = (0.0f64, 0usize);
    for _ in 0..1000 {
        let m = r.gen_range(1..=64);
        let base = random_psd(&mut r, m);
        let eig = StructuredCovariance::precompute(&base).unwrap();
        let z = random_cvec(&mut r, m);

        let a = random_cvec(&mut r, m);
        let g = r.gen_range(0.0..3.0);
        let dense = lu_logpdf(&z, &(&base + (&a * a.adjoint()) * c(g)));
        worst = worst.max(rel(logpdf_rank1_update(&eig, &a, g, &z).unwrap(), dense));

        let k = r.gen_range(1..=8.min(m));
        let u = random_cmat(&mut r, m, k);
        let dense = lu_logpdf(&z, &(&base + (&u * u.adjoint()) * c(g)));
        worst = worst.max(rel(logpdf_lowrank_scaled(&eig, &u, g, &z).unwrap(), dense));

        let low = {
            let v = random_cmat(&mut r, m, k);
            &v * v.adjoint()
        };
        let low = (&low + low.adjoint()) * c(0.5);
        let eta = r.gen_range(0.01..2.0);
        let dense = lu_logpdf(&z, &(&low + CMat::identity(m, m) * c(eta)));
        let s = StructuredCovariance::precompute(&low).unwrap();
        worst = worst.max(rel(logpdf_diag_shift(&s, eta, &z).unwrap(), dense));
        count += 3;
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        2,
        "structured likelihoods vs dense",
        worst <= 1e-9 && secs < 30.0,
        format!("{count} evaluations, max relative error {worst:.2e} (tol 1e-9), {secs:.1} s (limit 30 s)"),
    );
}

// ---------------------------------------------------------------------------
// 3. GOSPA versus exhaustive assignment

fn gospa_brute(truth: &[[f64; 2]], est: &[[f64; 2]], p: &GospaParams<f64>) -> f64 {
    fn rec(
        t: usize,
        truth: &[[f64; 2]],
        est: &[[f64; 2]],
        used: &mut [bool],
        acc: f64,
        k: usize,
        p: &GospaParams<f64>,
    ) -> f64 {
        if t == truth.len() {
            let unassigned = (truth.len() + est.len() - 2 * k) as f64;
            return acc + p.cutoff.powf(p.order) / p.alpha * unassigned;
        }
        let mut best = rec(t + 1, truth, est, used, acc, k, p);
        for e in 0..est.len() {
            let d = ((truth[t][0] - est[e][0]).powi(2) + (truth[t][1] - est[e][1]).powi(2)).sqrt();
            if !used[e] && d < p.cutoff {
                used[e] = true;
                best = best.min(rec(t + 1, truth, est, used, acc + d.powf(p.order), k + 1, p));
                used[e] = false;
            }
        }
        best
    }
    rec(0, truth, est, &mut vec![false; est.len()], 0.0, 0, p).powf(1.0 / p.order)
}

#[test]
fn criterion_3_gospa_matches_enumeration() {
    let _serial = serial();
    let mut r = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    let n_inst = 600;
    for _ in 0..n_inst {
        let p = GospaParams::new([2.0, 5.0, 10.0][r.gen_range(0..3)], r.gen_range(1..=2) as f64, 2.0).unwrap();
        let set = |r: &mut ChaCha8Rng| -> Vec<[f64; 2]> {
            (0..r.gen_range(0..=5)).map(|_| [r.gen_range(0.0..12.0), r.gen_range(0.0..12.0)]).collect()
        };
        let (t, e) = (set(&mut r), set(&mut r));
        worst = worst.max((gospa(&t, &e, &p).total - gospa_brute(&t, &e, &p)).abs());
    }
    let single = gospa(&[[3.0, 4.0]], &[], &GospaParams::new(5.0, 1.0, 2.0).unwrap()).total;
    report(
        3,
        "GOSPA vs exhaustive assignment",
        worst <= 1e-12 && single == 2.5,
        format!("{n_inst} instances, max error {worst:.2e} (tol 1e-12), single miss {single} (expected 2.5)"),
    );
}

// ---------------------------------------------------------------------------
// end-to-end criteria on the desk preset

fn desk(out: &Path) -> ExperimentSpec {
    let mut spec = ExperimentSpec::preset(Preset::Desk);
    spec.out_dir = out.to_path_buf();
    spec
}

#[test]
fn criterion_4_noise_power_estimation() {
    let _serial = serial();
    let dir = tempfile::tempdir().unwrap();
    let mut spec = desk(dir.path());
    spec.scenario.tracks = ScenarioConfig::crossing_scripts();
    spec.scenario.n_steps = 50;
    spec.window = [20, 50];
    let start = Instant::now();
    tbd_harness::simulate(&spec).unwrap();
    tbd_harness::track(&spec).unwrap();
    let rows = tbd_harness::noise_report(&spec).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let n_dict = spec.scenario.n_dict();
    let worst: Vec<f64> = (0..n_dict)
        .map(|i| rows.iter().filter(|r| r.dict == i && r.step >= 20).map(|r| r.mean_rel_error).fold(0.0, f64::max))
        .collect();
    report(
        4,
        "noise power estimation",
        worst.iter().all(|&w| w <= 0.20) && secs <= 900.0,
        format!(
            "{} runs, largest mean |eta_hat - eta| / eta over k >= 20 per dictionary {worst:.4?} (limit 0.20), {secs:.0} s",
            spec.n_runs
        ),
    );
}

#[test]
fn criterion_5_tracking_ordering() {
    let _serial = serial();
    let dir = tempfile::tempdir().unwrap();
    let spec = desk(dir.path());
    assert_eq!(spec.scenario.noise_power[0], MID_NOISE);
    let start = Instant::now();
    let ev = tbd_harness::all(&spec).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let (tbd, base) = (ev.window_mean(TBD).unwrap(), ev.window_mean(BASELINE).unwrap());
    report(
        5,
        "tracking ordering",
        tbd < base && secs <= 3600.0,
        format!(
            "{} runs, window-mean GOSPA steps 20-60: BP-TBD {tbd:.3} vs MP + GNN {base:.3}, {secs:.0} s",
            spec.n_runs
        ),
    );
}

/// Two distinct declared tracks within `c` of the two truths.
fn both_resolved(truth: [[f64; 2]; 2], est: &[[f64; 2]], c: f64) -> bool {
    let d = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
    (0..est.len()).any(|x| (0..est.len()).any(|y| x != y && d(truth[0], est[x]) <= c && d(truth[1], est[y]) <= c))
}

#[test]
fn criterion_6_crossing_objects_resolved() {
    let _serial = serial();
    let dir = tempfile::tempdir().unwrap();
    let mut spec = desk(dir.path());
    spec.scenario.noise_power = vec![0.5e-14; spec.scenario.n_dict()];
    tbd_harness::simulate(&spec).unwrap();
    tbd_harness::track(&spec).unwrap();
    let layout = Layout::new(dir.path());
    let mut good = 0;
    let mut first_fail = Vec::new();
    for run in 0..spec.n_runs {
        let ds = read_dataset(&layout.dataset(run)).unwrap();
        let est = positions_by_step(&read_csv::<TrackRow>(&layout.tracks(TBD, run)).unwrap(), ds.frames.len());
        let fail = (15..=65).find(|&k| {
            let t = [0, 1].map(|n| {
                let s = ds.tracks[n].state_at(k).unwrap();
                [s[0], s[1]]
            });
            !both_resolved(t, &est[k - 1], 5.0)
        });
        match fail {
            None => good += 1,
            Some(k) => first_fail.push((run, k)),
        }
    }
    report(
        6,
        "crossing objects resolved",
        good >= 8,
        format!(
            "{good}/{} runs keep both tracks within 5 m for 15 <= k <= 65 (need 8); first failing steps {first_fail:?}",
            spec.n_runs
        ),
    );
}

#[test]
fn criterion_7_false_alarm_control() {
    let _serial = serial();
    let dir = tempfile::tempdir().unwrap();
    let mut spec = desk(dir.path());
    spec.scenario.tracks.clear();
    spec.scenario.n_steps = 30;
    spec.n_runs = 20;
    spec.window = [1, 30];
    tbd_harness::simulate(&spec).unwrap();
    tbd_harness::track(&spec).unwrap();
    let layout = Layout::new(dir.path());
    let declared: usize = (0..spec.n_runs).map(|r| read_csv::<TrackRow>(&layout.tracks(TBD, r)).unwrap().len()).sum();
    let rate = declared as f64 / (spec.n_runs * spec.scenario.n_steps) as f64;
    report(
        7,
        "false-alarm control",
        rate <= 0.05,
        format!("{declared} declarations in {} noise-only steps, {rate:.4} per step (limit 0.05)", spec.n_runs * 30),
    );
}

#[test]
fn criterion_8_step_time_linear_in_po_count() {
    let _serial = serial();
    let mut sc = ScenarioConfig::paper(MID_NOISE, 10, 8, 7);
    sc.n_steps = 4;
    let ds = simulate(&sc).unwrap();
    let cfg = TrackerConfig {
        n_kin: 600,
        n_power: 100,
        n_noise: 50,
        t_pru: 0.0,
        init_policy: InitPolicy::None,
        ..TrackerConfig::default()
    };
    let counts = [1usize, 2, 4, 8, 16];
    let mut times = Vec::new();
    for &n in &counts {
        let mut best = f64::INFINITY;
        for rep in 0..3 {
            let mut t =
                Tracker::new(TrackerConfig { rng_seed: rep, ..cfg.clone() }, sc.sensors.clone(), sc.n_snapshots)
                    .unwrap();
            let mut r = ChaCha8Rng::seed_from_u64(rep);
            for _ in 0..n {
                let (x, y) = (r.gen_range(5.0..45.0), r.gen_range(5.0..45.0));
                let kin = (0..cfg.n_kin)
                    .map(|_| Vector4::new(x + r.gen_range(-1.0..1.0), y + r.gen_range(-1.0..1.0), 0.0, 0.0))
                    .collect();
                t.insert_po(kin, vec![vec![0.5; cfg.n_power]; 2], 0.5).unwrap();
            }
            let mut total = 0.0;
            for f in &ds.frames[1..] {
                let out = t.step(f).unwrap();
                assert_eq!(out.diagnostics.n_pos, n);
                total += out.diagnostics.elapsed_s;
            }
            best = best.min(total / (ds.frames.len() - 1) as f64);
        }
        times.push(best);
    }
    let xs: Vec<f64> = counts.iter().map(|&n| n as f64).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 5.0, times.iter().sum::<f64>() / 5.0);
    let sxy: f64 = xs.iter().zip(&times).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(&times).map(|(x, y)| (y - icpt - slope * x).powi(2)).sum();
    let ss_tot: f64 = times.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = 1.0 - ss_res / ss_tot;
    report(
        8,
        "per-step time linear in N_k",
        r2 >= 0.95 && slope > 0.0,
        format!(
            "step times {:?} ms for N_k = {counts:?}, slope {:.2} ms/PO, R^2 {r2:.4} (need 0.95)",
            times.iter().map(|t| (t * 1e4).round() / 10.0).collect::<Vec<_>>(),
            slope * 1e3
        ),
    );
}

fn csv_files(root: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for sub in std::fs::read_dir(root).unwrap() {
        let sub = sub.unwrap().path();
        if sub.is_dir() {
            for f in std::fs::read_dir(&sub).unwrap() {
                let f = f.unwrap().path();
                if f.extension().is_some_and(|e| e == "csv") {
                    out.push(f.strip_prefix(root).unwrap().to_path_buf());
                }
            }
        }
    }
    out.sort();
    out
}

#[test]
fn criterion_9_pipeline_is_deterministic() {
    let _serial = serial();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut spec = desk(a.path());
    spec.n_runs = 2;
    tbd_harness::all(&spec).unwrap();
    spec.out_dir = b.path().to_path_buf();
    tbd_harness::all(&spec).unwrap();
    let (fa, fb) = (csv_files(a.path()), csv_files(b.path()));
    let differing: Vec<_> = fa
        .iter()
        .filter(|f| std::fs::read(a.path().join(f)).unwrap() != std::fs::read(b.path().join(f)).unwrap())
        .collect();
    report(
        9,
        "determinism",
        fa == fb && !fa.is_empty() && differing.is_empty(),
        format!("{} result CSVs compared, {} differ", fa.len(), differing.len()),
    );
}
