use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{inf_norm, IterRecord, Objective, OptimError, Termination, TrainTrace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub iterations: usize,
    pub grad_tol: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            iterations: 0,
            grad_tol: 0.0,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<(), OptimError> {
        let unit = |b: f64| (0.0..1.0).contains(&b);
        if !(self.learning_rate > 0.0) || !unit(self.beta1) || !unit(self.beta2) {
            return Err(OptimError::InvalidConfig(
                "adam needs learning_rate > 0 and betas in [0, 1)".into(),
            ));
        }
        if !(self.epsilon > 0.0) {
            return Err(OptimError::InvalidConfig("adam epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// Adam with bias correction. A failed evaluation mid-run stops training at
/// the last good parameters.
pub fn adam_minimize(
    obj: &mut dyn Objective,
    init: &[f64],
    cfg: &AdamConfig,
) -> Result<(Vec<f64>, TrainTrace), OptimError> {
    cfg.validate()?;
    let start = Instant::now();
    let mut x = init.to_vec();
    let (mut loss, mut grad) = obj.eval(&x).map_err(OptimError::NonFiniteInit)?;
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(OptimError::NonFiniteInit(format!("loss {loss}")));
    }
    let mut m = vec![0.0; x.len()];
    let mut v = vec![0.0; x.len()];
    let mut records = vec![IterRecord {
        iteration: 0,
        loss,
        grad_norm: inf_norm(&grad),
        step: 0.0,
        elapsed_ms: 0.0,
    }];
    let mut evaluations = 1;
    let mut termination = Termination::MaxIterations;
    for k in 1..=cfg.iterations {
        if inf_norm(&grad) < cfg.grad_tol {
            termination = Termination::GradTol;
            break;
        }
        let c1 = 1.0 - cfg.beta1.powi(k as i32);
        let c2 = 1.0 - cfg.beta2.powi(k as i32);
        let prev = x.clone();
        for i in 0..x.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            let mh = m[i] / c1;
            let vh = v[i] / c2;
            x[i] -= cfg.learning_rate * mh / (vh.sqrt() + cfg.epsilon);
        }
        evaluations += 1;
        match obj.eval(&x) {
            Ok((l, g)) if l.is_finite() && g.iter().all(|v| v.is_finite()) => {
                loss = l;
                grad = g;
            }
            other => {
                x = prev;
                let why = match other {
                    Err(e) => e,
                    Ok((l, _)) => format!("non-finite loss {l}"),
                };
                termination = Termination::LineSearchFailed(format!("adam step diverged: {why}"));
                break;
            }
        }
        records.push(IterRecord {
            iteration: k,
            loss,
            grad_norm: inf_norm(&grad),
            step: cfg.learning_rate,
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok((
        x,
        TrainTrace {
            records,
            termination,
            evaluations,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bowl(x: &[f64]) -> Result<(f64, Vec<f64>), String> {
        let f = x.iter().map(|v| (v - 2.0).powi(2)).sum();
        Ok((f, x.iter().map(|v| 2.0 * (v - 2.0)).collect()))
    }

    #[test]
    fn quadratic_with_lr_0_1() {
        let cfg = AdamConfig {
            learning_rate: 0.1,
            iterations: 500,
            ..Default::default()
        };
        let mut obj = bowl;
        let (x, _) = adam_minimize(&mut obj, &[-3.0, 0.5, 7.0], &cfg).unwrap();
        for v in x {
            assert!((v - 2.0).abs() < 1e-3, "{v}");
        }
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut obj = |_: &[f64]| -> Result<(f64, Vec<f64>), String> { Ok((1.0, vec![0.0; 3])) };
        let cfg = AdamConfig {
            iterations: 20,
            ..Default::default()
        };
        let (x, _) = adam_minimize(&mut obj, &[1.0, -2.0, 3.0], &cfg).unwrap();
        assert_eq!(x, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn zero_betas_hand_steps() {
        // θ² from θ = 1 with lr 0.1: each step moves by 0.1·g/(|g|+ε).
        let mut obj = |x: &[f64]| -> Result<(f64, Vec<f64>), String> {
            Ok((x[0] * x[0], vec![2.0 * x[0]]))
        };
        let cfg = AdamConfig {
            learning_rate: 0.1,
            beta1: 0.0,
            beta2: 0.0,
            epsilon: 1e-8,
            iterations: 3,
            grad_tol: 0.0,
        };
        let (x, trace) = adam_minimize(&mut obj, &[1.0], &cfg).unwrap();
        let mut th = 1.0f64;
        for _ in 0..3 {
            let g = 2.0 * th;
            th -= 0.1 * g / (g.abs() + 1e-8);
        }
        assert!((x[0] - th).abs() < 1e-15);
        assert!((x[0] - 0.7).abs() < 1e-7);
        assert_eq!(trace.records.len(), 4);
    }
}
