use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::loss::{LossBreakdown, LossObjective, LAMBDA_NAMES};
use crate::metrics::{self, ErrorField, LambdaResult, TrialResult};
use crate::network::{init_xavier, Architecture, MlpParams};
use crate::optim::{adam_minimize, lbfgs_minimize, OptimError, Termination, TrainTrace};
use crate::problems::{Mode, ProblemSpec};
use crate::sampling::{corrupt, draw_without_replacement, latin_hypercube, sample_ib, streams, PointSet};

use super::{HarnessError, TrainConfig};

/// Everything a trial produces.
#[derive(Clone, Debug)]
pub struct TrialArtifacts {
    pub result: TrialResult,
    pub params: MlpParams,
    pub trace: TrainTrace,
    pub field: Option<ErrorField>,
}

impl TrialArtifacts {
    pub fn diverged(&self) -> bool {
        self.result.failure.is_some()
    }

    /// `<problem>-<method>-s<seed>-<hash>`.
    pub fn id(&self) -> String {
        let c = &self.result.config;
        format!(
            "{}-{}-s{}-{}",
            c["problem"].as_str().unwrap_or("trial"),
            if c["spinn"].as_bool() == Some(true) { "spinn" } else { "pinn" },
            self.result.seed,
            self.result.config_hash
        )
    }
}

/// Training points for a trial, derived from the seed only.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialData {
    /// Initial/boundary targets, or noisy observations in inverse mode.
    pub targets: PointSet,
    pub colloc: PointSet,
}

pub fn trial_data(cfg: &TrainConfig, problem: &ProblemSpec) -> Result<TrialData, HarnessError> {
    let sampling = |e: crate::sampling::SamplingError| HarnessError::BadConfig(e.to_string());
    match problem.mode {
        Mode::Forward => Ok(TrialData {
            targets: sample_ib(problem, cfg.n_u, cfg.seed).map_err(sampling)?,
            colloc: latin_hypercube(
                cfg.n_colloc,
                problem.grid.t_range,
                problem.grid.x_range,
                cfg.seed,
            ),
        }),
        Mode::Inverse => {
            let pool = problem.ib_pool().map_err(sampling)?;
            let mut data = draw_without_replacement(&pool, cfg.n_u, cfg.seed, streams::DATA).map_err(sampling)?;
            if cfg.noise > 0.0 {
                let u = data.u.take().expect("inverse pool carries targets");
                data.u = Some(corrupt(&u, cfg.noise, cfg.seed));
            }
            Ok(TrialData {
                targets: data,
                colloc: PointSet::default(),
            })
        }
    }
}

fn train(
    cfg: &TrainConfig,
    objective: &mut LossObjective<'_>,
    init: &[f64],
) -> Result<(Vec<f64>, TrainTrace), OptimError> {
    let mut f = |x: &[f64]| -> Result<(f64, Vec<f64>), String> {
        objective
            .evaluate(x)
            .map(|(b, g)| (b.total, g))
            .map_err(|e| e.to_string())
    };
    let opt = &cfg.optimizer;
    if opt.adam.iterations > 0 {
        let (x, mut trace) = adam_minimize(&mut f, init, &opt.adam)?;
        let (x, rest) = lbfgs_minimize(&mut f, &x, &opt.lbfgs)?;
        trace.extend(rest);
        Ok((x, trace))
    } else {
        lbfgs_minimize(&mut f, init, &opt.lbfgs)
    }
}

/// Builds, trains and evaluates one configuration. Divergence is reported
/// in `result.failure` rather than as an error.
pub fn run_trial(cfg: &TrainConfig) -> Result<TrialArtifacts, HarnessError> {
    let problem = cfg.validate()?;
    let arch = Architecture::new(cfg.hidden_layers, cfg.neurons, problem.unknowns)
        .map_err(|e| HarnessError::BadConfig(e.to_string()))?;
    let extras: &[&str] = match problem.mode {
        Mode::Forward => &[],
        Mode::Inverse => &LAMBDA_NAMES,
    };
    let mut init = init_xavier(&arch, cfg.seed, extras).map_err(|e| HarnessError::BadConfig(e.to_string()))?;
    for (name, v) in LAMBDA_NAMES.iter().zip(cfg.lambda_init) {
        if let Some(i) = init.extra_offset(name) {
            init.flat[i] = v;
        }
    }
    let data = trial_data(cfg, &problem)?;
    let mut objective = LossObjective::new(&problem, &init, &data.targets, &data.colloc, cfg.spinn);

    let start = Instant::now();
    let trained = train(cfg, &mut objective, &init.flat);
    let seconds = start.elapsed().as_secs_f64();

    let config = serde_json::to_value(cfg).expect("configs serialize");
    let mut result = TrialResult {
        config,
        config_hash: cfg.hash(),
        seed: cfg.seed,
        errors: vec![f64::NAN; problem.unknowns],
        combined_error: f64::NAN,
        lambda: None,
        seconds,
        final_loss: LossBreakdown::default(),
        iterations: 0,
        termination: String::new(),
        failure: None,
    };
    let (flat, trace) = match trained {
        Ok(v) => v,
        Err(e) => {
            log::warn!("trial {} diverged: {e}", cfg.hash());
            result.failure = Some(e.to_string());
            let trace = TrainTrace {
                records: Vec::new(),
                termination: Termination::LineSearchFailed(e.to_string()),
                evaluations: 0,
            };
            return Ok(TrialArtifacts {
                result,
                params: init,
                trace,
                field: None,
            });
        }
    };
    let params = init.with_flat(flat).expect("optimizer preserves length");
    result.iterations = trace.records.len().saturating_sub(1);
    result.termination = termination_label(&trace.termination);
    match objective.evaluate(&params.flat) {
        Ok((b, _)) if b.total.is_finite() => result.final_loss = b,
        Ok((b, _)) => result.failure = Some(format!("non-finite final loss {}", b.total)),
        Err(e) => result.failure = Some(e.to_string()),
    }

    let field = metrics::abs_error_field(&params, &problem).ok();
    if let Some(f) = &field {
        result.errors = f.l2.clone();
        result.combined_error = f.l2.iter().sum();
        if result.combined_error.is_nan() && result.failure.is_none() {
            result.failure = Some("network output is not finite".into());
        }
    }
    if let Some((l1, l2)) = problem.lambda_true() {
        let learned = [
            params.extra_value(LAMBDA_NAMES[0]).unwrap_or(f64::NAN),
            params.extra_value(LAMBDA_NAMES[1]).unwrap_or(f64::NAN),
        ];
        result.lambda = Some(LambdaResult {
            learned,
            truth: [l1, l2],
            percent_error: [
                metrics::percent_error(learned[0], l1),
                metrics::percent_error(learned[1], l2),
            ],
        });
    }
    log::info!(
        "{} {} seed {}: error {:.4e} in {:.1}s ({} iterations, {})",
        cfg.problem,
        cfg.method(),
        cfg.seed,
        result.combined_error,
        seconds,
        result.iterations,
        result.termination
    );
    Ok(TrialArtifacts {
        result,
        params,
        trace,
        field,
    })
}

fn termination_label(t: &Termination) -> String {
    match t {
        Termination::GradTol => "grad_tol".into(),
        Termination::LossTol => "loss_tol".into(),
        Termination::MaxIterations => "max_iterations".into(),
        Termination::LineSearchFailed(r) => format!("line_search_failed: {r}"),
    }
}

/// Flat parameters with their shape header.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamsSnapshot {
    pub config_hash: String,
    pub params: MlpParams,
}

/// Writes `config.json`, `result.json`, `params.json`, `trace.csv` and
/// `field_<id>.csv` into `dir/<id>/`; returns that directory.
pub fn persist_trial(dir: &Path, art: &TrialArtifacts) -> Result<PathBuf, HarnessError> {
    let out = dir.join(art.id());
    fs::create_dir_all(&out).map_err(|e| HarnessError::io(&out, e))?;
    write_json(&out.join("config.json"), &art.result.config)?;
    write_json(&out.join("result.json"), &art.result)?;
    write_json(
        &out.join("params.json"),
        &ParamsSnapshot {
            config_hash: art.result.config_hash.clone(),
            params: art.params.clone(),
        },
    )?;
    let trace_path = out.join("trace.csv");
    let f = File::create(&trace_path).map_err(|e| HarnessError::io(&trace_path, e))?;
    metrics::write_rows(BufWriter::new(f), &art.trace.records)?;
    if let Some(field) = &art.field {
        let path = out.join(format!("field_{}.csv", art.id()));
        let f = File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
        field.write_csv(BufWriter::new(f))?;
    }
    Ok(out)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let f = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::to_writer_pretty(BufWriter::new(f), value)
        .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}
