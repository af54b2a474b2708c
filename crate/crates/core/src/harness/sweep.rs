use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;

use crate::metrics::{self, InverseRow, SweepRow, SweepSummary};
use crate::problems::Mode;

use super::trial::{persist_trial, run_trial, write_json, TrialArtifacts};
use super::{derive_seed, HarnessError, SweepConfig, TrainConfig};

/// Environment variable capping concurrent trials.
pub const WORKERS_ENV: &str = "SPINN_WORKERS";

fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Sweep rows in `(cell, run, method)` order plus per-cell statistics.
#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub inverse_rows: Vec<InverseRow>,
    pub summary: SweepSummary,
    pub trials: Vec<TrialArtifacts>,
}

/// The `(cell, run, method)` job list with matched seeds.
pub fn sweep_jobs(cfg: &SweepConfig) -> Vec<(usize, f64, TrainConfig)> {
    let mut jobs = Vec::new();
    for (cell, &value) in cfg.values.iter().enumerate() {
        for run in 0..cfg.runs_per_cell {
            let seed = derive_seed(cfg.master_seed, cell, run);
            for spinn in [false, true] {
                let mut c = cfg.sweep_var.apply(&cfg.base, value);
                c.seed = seed;
                c.spinn = spinn;
                jobs.push((cell, value, c));
            }
        }
    }
    jobs
}

/// Runs every cell for both methods. Failed trials are kept as rows with
/// NaN errors; the sweep carries on.
pub fn run_sweep(cfg: &SweepConfig, out: Option<&Path>) -> Result<SweepOutcome, HarnessError> {
    cfg.validate()?;
    let jobs = sweep_jobs(cfg);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| HarnessError::Io(e.to_string()))?;
    let trials: Vec<Result<TrialArtifacts, HarnessError>> =
        pool.install(|| jobs.par_iter().map(|(_, _, c)| run_trial(c)).collect());
    let trials: Vec<TrialArtifacts> = trials.into_iter().collect::<Result<_, _>>()?;

    let problem = cfg.base.problem_spec()?;
    let var = cfg.sweep_var.name();
    let mut rows = Vec::new();
    let mut inverse_rows = Vec::new();
    for ((_, value, c), t) in jobs.iter().zip(&trials) {
        let r = &t.result;
        if let Some(f) = &r.failure {
            log::warn!("{} failed: {f}", t.id());
        }
        rows.push(SweepRow {
            problem: c.problem.clone(),
            method: c.method().to_string(),
            sweep_var: var.to_string(),
            value: *value,
            seed: c.seed,
            error_u: r.error_u(),
            error_v: r.error_v(),
            seconds: r.seconds,
            config_hash: r.config_hash.clone(),
        });
        if problem.mode == Mode::Inverse {
            let pct = r.lambda.as_ref().map_or([f64::NAN; 2], |l| l.percent_error);
            inverse_rows.push(InverseRow {
                layers: c.hidden_layers,
                neurons: c.neurons,
                n_u: c.n_u,
                noise: c.noise,
                method: c.method().to_string(),
                err_lambda1_pct: pct[0],
                err_lambda2_pct: pct[1],
                seconds: r.seconds,
                config_hash: r.config_hash.clone(),
            });
        }
    }
    let summary = SweepSummary::from_rows(&cfg.base.problem, var, &rows);

    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        write_json(&dir.join("sweep.json"), cfg)?;
        write_json(&dir.join("summary.json"), &summary)?;
        let csv_path = dir.join("sweep.csv");
        let f = File::create(&csv_path).map_err(|e| HarnessError::io(&csv_path, e))?;
        metrics::write_rows(BufWriter::new(f), &rows)?;
        if !inverse_rows.is_empty() {
            let path = dir.join("inverse.csv");
            let f = File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
            metrics::write_rows(BufWriter::new(f), &inverse_rows)?;
        }
        let trial_dir = dir.join("trials");
        for t in &trials {
            persist_trial(&trial_dir, t)?;
        }
    }
    Ok(SweepOutcome {
        rows,
        inverse_rows,
        summary,
        trials,
    })
}
