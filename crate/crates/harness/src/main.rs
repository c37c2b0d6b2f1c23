use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tbd_harness::{ExperimentSpec, HarnessError, Preset};

#[derive(Parser, Debug)]
#[command(name = "tbd", version, about = "Track-before-detect experiment driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment spec; its keys override the preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    runs: Option<usize>,
    /// Seed of run 0; run r uses seed + r.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    preset: Option<Preset>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Generate one dataset per run.
    Simulate,
    /// Run the BP-TBD tracker on the datasets.
    Track,
    /// Run matching pursuit + GNN Kalman tracking on the datasets.
    Baseline,
    /// Per-step and window-mean GOSPA for every method.
    Evaluate,
    /// Estimated versus true noise power.
    NoiseReport,
    /// simulate, track, baseline, evaluate and noise-report.
    All,
    /// Print the resolved experiment spec as TOML.
    Config,
}

fn resolve(cli: &Cli) -> Result<ExperimentSpec, HarnessError> {
    let base = ExperimentSpec::preset(cli.preset.unwrap_or(Preset::Desk));
    let mut spec = match &cli.config {
        Some(p) => ExperimentSpec::load_over(p, &base)?,
        None => base,
    };
    if let Some(o) = &cli.out {
        spec.out_dir = o.clone();
    }
    if let Some(n) = cli.runs {
        spec.n_runs = n;
    }
    if let Some(s) = cli.seed {
        spec.seed_base = s;
    }
    spec.validate()?;
    Ok(spec)
}

fn run(cli: &Cli) -> Result<(), HarnessError> {
    let spec = resolve(cli)?;
    match cli.command {
        Command::Simulate => tbd_harness::simulate(&spec)?,
        Command::Track => tbd_harness::track(&spec)?,
        Command::Baseline => tbd_harness::baseline(&spec)?,
        Command::Evaluate => print!("{}", tbd_harness::evaluate(&spec)?.table()),
        Command::NoiseReport => {
            let rows = tbd_harness::noise_report(&spec)?;
            let worst = rows.iter().map(|r| r.mean_rel_error).fold(0.0, f64::max);
            println!("{} rows, largest mean relative error {worst:.4}", rows.len());
        }
        Command::All => print!("{}", tbd_harness::all(&spec)?.table()),
        Command::Config => print!("{}", spec.to_toml_string()?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
