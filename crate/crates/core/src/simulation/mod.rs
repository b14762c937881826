//! Monte Carlo engine for the benchmark design: a cohort with logistic trial
//! participation, multinomial allocation of participants to three trials,
//! within-trial randomization and linear potential outcomes.

mod calibrate;
mod cohort;
mod grid;
mod scenario;
mod truth;

pub use calibrate::{solve_allocation_intercepts, solve_intercept};
pub use cohort::SimulatedCohort;
pub use grid::{
    run_grid, run_grid_with, CellSummary, GridAxes, GridConfig, RunOptions, ScenarioSummary, SimulationSummary,
    MAX_REPLICATION_FAILURE_RATE,
};
pub use scenario::{Intercepts, Scenario, ScenarioConfig, N_TRIALS};
pub use truth::{TruthEstimate, MIN_ORACLE_DRAW};
