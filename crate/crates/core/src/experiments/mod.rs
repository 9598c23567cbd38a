//! Benchmark systems, scenarios and Monte-Carlo tables.

pub mod monte_carlo;
pub mod output;
pub mod scenario;
pub mod systems;

pub use monte_carlo::{
    delay_rmse_sweep, estimate, mean_sd, median_of, online_trial, rmse_theta, run_monte_carlo,
    run_online, trial_seed, Aggregate, MonteCarloReport, OnlineTrial, SweepPoint, TrialData,
    TrialFailure, TrialResult,
};
pub use scenario::{Method, OnlineNoiseMode, Scenario, SigmaMode, SystemKind, SystemTruth};
pub use systems::{system_i, system_ii, FirDesign};
