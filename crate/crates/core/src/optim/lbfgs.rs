use std::collections::VecDeque;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::linesearch::{strong_wolfe, LineSearchOutcome, WolfeParams};
use super::{dot, inf_norm, IterRecord, Objective, OptimError, Termination, TrainTrace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub max_iterations: usize,
    /// On the infinity norm of the gradient.
    pub grad_tol: f64,
    /// Relative loss change over `loss_window` iterations.
    pub loss_tol: f64,
    pub loss_window: usize,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    pub max_linesearch_steps: usize,
    /// Scale the initial inverse Hessian by `sᵀy / yᵀy` of the newest pair.
    pub scale_initial_hessian: bool,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            memory: 50,
            max_iterations: 20_000,
            grad_tol: 1e-9,
            loss_tol: 1e-12,
            loss_window: 10,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.9,
            max_linesearch_steps: 40,
            scale_initial_hessian: true,
        }
    }
}

impl LbfgsConfig {
    pub fn validate(&self) -> Result<(), OptimError> {
        let bad = |m: &str| Err(OptimError::InvalidConfig(m.to_string()));
        if !(0.0 < self.wolfe_c1 && self.wolfe_c1 < self.wolfe_c2 && self.wolfe_c2 < 1.0) {
            return bad("need 0 < wolfe_c1 < wolfe_c2 < 1");
        }
        if self.memory == 0 {
            return bad("memory must be at least 1");
        }
        if self.max_linesearch_steps == 0 {
            return bad("max_linesearch_steps must be at least 1");
        }
        if !(self.grad_tol >= 0.0) || !(self.loss_tol >= 0.0) {
            return bad("tolerances must be non-negative");
        }
        if self.loss_window == 0 {
            return bad("loss_window must be at least 1");
        }
        Ok(())
    }

    fn wolfe(&self) -> WolfeParams {
        WolfeParams {
            c1: self.wolfe_c1,
            c2: self.wolfe_c2,
            max_evals: self.max_linesearch_steps,
        }
    }
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

/// `−H·g` by the two-loop recursion over `(s, y)` pairs, oldest first, with
/// `H₀ = gamma·I`.
pub fn two_loop_direction(grad: &[f64], pairs: &[(&[f64], &[f64])], gamma: f64) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alpha = vec![0.0; pairs.len()];
    for (i, (s, y)) in pairs.iter().enumerate().rev() {
        let rho = 1.0 / dot(y, s);
        alpha[i] = rho * dot(s, &q);
        for (qj, yj) in q.iter_mut().zip(y.iter()) {
            *qj -= alpha[i] * yj;
        }
    }
    for qj in q.iter_mut() {
        *qj *= gamma;
    }
    for (i, (s, y)) in pairs.iter().enumerate() {
        let rho = 1.0 / dot(y, s);
        let beta = rho * dot(y, &q);
        for (qj, sj) in q.iter_mut().zip(s.iter()) {
            *qj += (alpha[i] - beta) * sj;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

fn direction(grad: &[f64], history: &VecDeque<Pair>, scale: bool) -> Vec<f64> {
    let gamma = match history.back() {
        Some(p) if scale => 1.0 / (p.rho * dot(&p.y, &p.y)),
        _ => 1.0,
    };
    let pairs: Vec<(&[f64], &[f64])> = history
        .iter()
        .map(|p| (p.s.as_slice(), p.y.as_slice()))
        .collect();
    two_loop_direction(grad, &pairs, gamma)
}

/// Minimizes `obj` from `init`. Line-search failure ends the run with the
/// best point so far rather than an error.
pub fn lbfgs_minimize(
    obj: &mut dyn Objective,
    init: &[f64],
    cfg: &LbfgsConfig,
) -> Result<(Vec<f64>, TrainTrace), OptimError> {
    cfg.validate()?;
    let start = Instant::now();
    let (mut loss, mut grad) = obj.eval(init).map_err(OptimError::NonFiniteInit)?;
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(OptimError::NonFiniteInit(format!("loss {loss}")));
    }
    let mut x = init.to_vec();
    let mut evaluations = 1;
    let mut history: VecDeque<Pair> = VecDeque::with_capacity(cfg.memory);
    let mut records = vec![IterRecord {
        iteration: 0,
        loss,
        grad_norm: inf_norm(&grad),
        step: 0.0,
        elapsed_ms: 0.0,
    }];

    let termination = loop {
        let k = records.len() - 1;
        if inf_norm(&grad) < cfg.grad_tol {
            break Termination::GradTol;
        }
        if k >= cfg.max_iterations {
            break Termination::MaxIterations;
        }
        if k >= cfg.loss_window {
            let old = records[k - cfg.loss_window].loss;
            if (old - loss).abs() <= cfg.loss_tol * old.abs().max(loss.abs()).max(1.0) {
                break Termination::LossTol;
            }
        }

        let mut d = direction(&grad, &history, cfg.scale_initial_hessian);
        if !(dot(&d, &grad) < 0.0) {
            history.clear();
            d = grad.iter().map(|g| -g).collect();
        }
        let mut first = history.is_empty();
        let outcome = loop {
            // Without curvature information, a unit step along −g can be
            // wildly off-scale.
            let a0 = if history.is_empty() {
                1.0f64.min(1.0 / grad.iter().map(|g| g.abs()).sum::<f64>())
            } else {
                1.0
            };
            let out = strong_wolfe(obj, &x, loss, &grad, &d, a0, cfg.wolfe());
            match out {
                LineSearchOutcome::Failed { evals, .. } if !first => {
                    // Retry once along steepest descent with a fresh memory.
                    evaluations += evals;
                    history.clear();
                    d = grad.iter().map(|g| -g).collect();
                    first = true;
                }
                other => break other,
            }
        };
        let (step, new_loss, new_grad) = match outcome {
            LineSearchOutcome::Accepted {
                step,
                loss,
                grad,
                evals,
            } => {
                evaluations += evals;
                (step, loss, grad)
            }
            LineSearchOutcome::Failed { reason, evals } => {
                evaluations += evals;
                break Termination::LineSearchFailed(reason);
            }
        };

        let s: Vec<f64> = d.iter().map(|di| step * di).collect();
        let y: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        for (xi, si) in x.iter_mut().zip(&s) {
            *xi += si;
        }
        if sy > f64::EPSILON * dot(&y, &y) {
            if history.len() == cfg.memory {
                history.pop_front();
            }
            history.push_back(Pair { s, y, rho: 1.0 / sy });
        }
        loss = new_loss;
        grad = new_grad;
        records.push(IterRecord {
            iteration: k + 1,
            loss,
            grad_norm: inf_norm(&grad),
            step,
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        log::trace!("lbfgs it {} loss {:.6e} |g| {:.3e}", k + 1, loss, inf_norm(&grad));
    };

    Ok((
        x,
        TrainTrace {
            records,
            termination,
            evaluations,
        },
    ))
}
