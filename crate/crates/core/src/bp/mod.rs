//! Track-before-detect by particle belief propagation with Gaussian moment
//! matching of the measurement-update messages.

mod config;
mod messages;
mod state;
mod tracker;

pub use config::{InitPolicy, TrackerConfig};
pub use messages::{
    compute_moment_stats, eta_hats, gamma_hats, kappa_messages, lambda_messages, nu_messages, sigma_factors,
    sigma_support, signal_covariances, MomentStats, StepContext,
};
pub use state::{systematic_indices, NoiseBelief, PotentialObject};
pub use tracker::{
    compute_beliefs, noise_belief, run_bp, DeclaredTrack, PoBelief, StepDiagnostics, Tracker, TrackerOutput,
};
