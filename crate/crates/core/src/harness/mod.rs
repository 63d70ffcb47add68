//! Simulation, Monte Carlo orchestration and file formats.

pub mod io;
mod montecarlo;
mod simulate;

pub use montecarlo::{
    run_monte_carlo, run_monte_carlo_with, run_seed, MonteCarloConfig, MonteCarloReport,
    RunBounds, RunRecord, Summary,
};
pub use simulate::{default_burn_in, simulate, SimulationConfig, GAUSSIAN_ALGORITHM};
