//! Full-batch optimizers: L-BFGS with a strong-Wolfe line search, and Adam.

mod adam;
mod lbfgs;
mod linesearch;

pub use adam::{adam_minimize, AdamConfig};
pub use lbfgs::{lbfgs_minimize, two_loop_direction, LbfgsConfig};
pub use linesearch::{strong_wolfe, LineSearchOutcome, WolfeParams};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OptimError {
    #[error("objective is not finite at the initial point: {0}")]
    NonFiniteInit(String),
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
}

/// A loss-and-gradient oracle. Errors are treated as an infinite loss by
/// the line search.
pub trait Objective {
    fn eval(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>), String>;
}

impl<F> Objective for F
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>), String>,
{
    fn eval(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>), String> {
        self(x)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", content = "detail", rename_all = "snake_case")]
pub enum Termination {
    GradTol,
    LossTol,
    MaxIterations,
    LineSearchFailed(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iteration: usize,
    pub loss: f64,
    pub grad_norm: f64,
    pub step: f64,
    pub elapsed_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<IterRecord>,
    pub termination: Termination,
    pub evaluations: usize,
}

impl TrainTrace {
    pub fn final_loss(&self) -> Option<f64> {
        self.records.last().map(|r| r.loss)
    }

    /// Appends another trace (e.g. L-BFGS after an Adam warm start),
    /// renumbering iterations and offsetting times.
    pub fn extend(&mut self, other: TrainTrace) {
        let (it0, t0) = self
            .records
            .last()
            .map_or((0, 0.0), |r| (r.iteration + 1, r.elapsed_ms));
        self.records.extend(other.records.into_iter().map(|mut r| {
            r.iteration += it0;
            r.elapsed_ms += t0;
            r
        }));
        self.termination = other.termination;
        self.evaluations += other.evaluations;
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}
