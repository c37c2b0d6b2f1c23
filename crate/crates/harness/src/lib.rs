//! Experiment driver: scenario generation, tracking and baseline runs,
//! GOSPA evaluation and noise reports, with CSV outputs and a JSON run
//! manifest.

pub mod error;
pub mod pipeline;
pub mod records;
pub mod spec;

pub use error::{HarnessError, Result};
pub use pipeline::{all, baseline, evaluate, noise_report, simulate, track, Evaluation, Layout, BASELINE, TBD};
pub use spec::{ExperimentSpec, Preset, MID_NOISE};
