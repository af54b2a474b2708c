//! Experiment orchestration: single trials, matched-seed sweeps, cost
//! reports and the on-disk result store.
//!
//! A sweep directory holds `sweep.json`, `summary.json`, `sweep.csv`
//! (`inverse.csv` for the inverse problem) and one `trials/<id>/` folder per
//! trial with its config, result, trace, parameters and error field.

mod config;
mod costs;
mod sweep;
mod trial;

use std::path::Path;

pub use config::{derive_seed, OptimizerConfig, SweepConfig, SweepVar, TrainConfig};
pub use costs::{find_sweep_csvs, load_rows, report_costs, CellCost, CostReport, FamilyCost, REFERENCE_BAND};
pub use sweep::{run_sweep, sweep_jobs, SweepOutcome, WORKERS_ENV};
pub use trial::{persist_trial, run_trial, trial_data, ParamsSnapshot, TrialArtifacts, TrialData};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        HarnessError::Io(format!("{}: {e}", path.display()))
    }

    /// Process exit code: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::BadConfig(_) => 2,
            _ => 1,
        }
    }
}
