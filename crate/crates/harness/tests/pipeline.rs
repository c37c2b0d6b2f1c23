use std::fs;
use std::path::Path;
use std::process::Command;

use tbd_core::radar::{read_dataset, truth_positions};
use tbd_harness::records::{read_csv, write_csv, NoiseRow, TrackRow};
use tbd_harness::{evaluate, noise_report, simulate, ExperimentSpec, HarnessError, Layout, Preset, BASELINE, TBD};

fn small(out: &Path, runs: usize) -> ExperimentSpec {
    let mut spec = ExperimentSpec::preset(Preset::Desk);
    spec.out_dir = out.to_path_buf();
    spec.n_runs = runs;
    spec.scenario.n_steps = 4;
    spec.window = [1, 4];
    spec
}

fn tbd(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_tbd")).args(args).output().unwrap()
}

fn perfect_tracks(layout: &Layout, run: usize) -> Vec<TrackRow> {
    let ds = read_dataset(&layout.dataset(run)).unwrap();
    let mut rows = Vec::new();
    for k in 1..=ds.frames.len() {
        for (n, p) in truth_positions(&ds.tracks, k).into_iter().enumerate() {
            rows.push(TrackRow { step: k, track_id: n as u64, existence: 1.0, px: p[0], py: p[1], vx: 0.0, vy: 0.0 });
        }
    }
    rows
}

#[test]
fn bad_config_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "n_runs = 0\n").unwrap();
    let out = tbd(&["config", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    fs::write(&cfg, "window = [10, 5]\n").unwrap();
    assert_eq!(tbd(&["config", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn missing_dataset_exits_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = tbd(&["track", "--out", dir.path().to_str().unwrap(), "--runs", "1"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn config_round_trips_through_toml() {
    let spec = ExperimentSpec::preset(Preset::Paper);
    let back = ExperimentSpec::from_toml_str(&spec.to_toml_string().unwrap()).unwrap();
    assert_eq!(back.to_toml_string().unwrap(), spec.to_toml_string().unwrap());
}

#[test]
fn simulate_writes_distinct_runs_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small(dir.path(), 2);
    simulate(&spec).unwrap();
    let layout = Layout::new(dir.path());
    let a = fs::read(layout.dataset(0)).unwrap();
    let b = fs::read(layout.dataset(1)).unwrap();
    assert_ne!(a, b);
    simulate(&spec).unwrap();
    assert_eq!(fs::read(layout.dataset(0)).unwrap(), a);
    assert_eq!(fs::read(layout.dataset(1)).unwrap(), b);
    assert!(layout.manifest().exists());
}

#[test]
fn perfect_estimates_score_zero_and_methods_get_one_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small(dir.path(), 1);
    simulate(&spec).unwrap();
    let layout = Layout::new(dir.path());
    for m in [TBD, BASELINE] {
        fs::create_dir_all(dir.path().join(m)).unwrap();
    }
    write_csv(&layout.tracks(TBD, 0), &perfect_tracks(&layout, 0)).unwrap();
    write_csv::<TrackRow>(&layout.tracks(BASELINE, 0), &[]).unwrap();

    let ev = evaluate(&spec).unwrap();
    assert_eq!(ev.window_mean(TBD), Some(0.0));
    for m in [TBD, BASELINE] {
        let steps: Vec<usize> = ev.per_step.iter().filter(|r| r.method == m).map(|r| r.step).collect();
        assert_eq!(steps, vec![1, 2, 3, 4]);
    }
    let n_truth = read_dataset(&layout.dataset(0)).unwrap().tracks.len();
    if n_truth > 0 {
        assert!(ev.window_mean(BASELINE).unwrap() > 0.0);
    }
}

#[test]
fn evaluate_rejects_run_count_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = small(dir.path(), 1);
    simulate(&spec).unwrap();
    let layout = Layout::new(dir.path());
    fs::create_dir_all(dir.path().join(TBD)).unwrap();
    write_csv(&layout.tracks(TBD, 0), &perfect_tracks(&layout, 0)).unwrap();
    spec.n_runs = 2;
    let err = evaluate(&spec).unwrap_err();
    assert!(matches!(err, HarnessError::Config(_)), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn exact_noise_estimates_report_zero_error() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small(dir.path(), 2);
    let layout = Layout::new(dir.path());
    fs::create_dir_all(dir.path().join(TBD)).unwrap();
    for run in 0..2 {
        let rows: Vec<NoiseRow> = (1..=4)
            .flat_map(|step| (0..3).map(move |dict| NoiseRow { step, dict, eta_hat: 1e-14, eta_true: 1e-14 }))
            .collect();
        write_csv(&layout.noise(run), &rows).unwrap();
    }
    let report = noise_report(&spec).unwrap();
    assert_eq!(report.len(), 12);
    assert!(report.iter().all(|r| r.mean_rel_error == 0.0 && r.mean_eta_hat == 1e-14));
    let back: Vec<tbd_harness::records::NoiseReportRow> = read_csv(&layout.eval("noise_report.csv")).unwrap();
    assert_eq!(back.len(), 12);
}
